"""Gradient-based fitting of body parameters to observed point trajectories.

One Adam run per sequence over the flat vector [root (T,3), root_orient (T,3),
pose (T,21,3), shape (16)]; every gradient is analytic (FK backward pass plus
the prior's input gradients), so an iteration costs one forward and one
backward sweep. The loss is

    w_rec * reconstruction + w_prior * latent prior penalty
    + w_reg_shape * ||beta||^2 + w_reg_smooth * smoothness + w_reg_bone * ground,

where reconstruction is the mean squared distance between model joints and
their (weighted-average) observed targets, smoothness penalizes frame-to-frame
parameter jumps, and ground penalizes foot joints below the z = 0 plane.
Angles wrap to [-pi, pi) after every step. A non-finite loss or parameter
aborts the sequence with a fit-failure record instead of raising.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigurationError, UsageError
from .kinematics import (
    FOOT_JOINTS,
    NUM_BODY_JOINTS,
    NUM_JOINTS,
    POSE_DIM,
    SHAPE_DIM,
    UNDERCOMPLETE_17_JOINTS,
    MotionSequence,
    ParamGrads,
    ParamSequence,
    Skeleton,
    fk_backward,
    fk_with_cache,
    overcomplete_layout,
    wrap_axis_angle,
)
from .numerics import AdamState, adam_step
from .priors import latent_prior_penalty


@dataclass(frozen=True)
class JointMapping:
    """Correspondence between observed point columns and model joints.

    groups maps each covered model joint to a tuple of (observed index,
    weight) pairs; multiple observed points per joint are weighted-averaged
    before comparison. Unlisted joints are unobserved (the prior owns them).
    root_proxy is the observed index whose track initializes the root.
    """

    groups: tuple  # tuple of (joint_index, ((obs_index, weight), ...))
    num_observed: int
    root_proxy: int

    def __post_init__(self):
        seen = set()
        for joint, entries in self.groups:
            if joint in seen:
                raise UsageError(f"JointMapping: joint {joint} mapped twice")
            seen.add(joint)
            if not entries:
                raise UsageError(f"JointMapping: joint {joint} has no observed points")
            for obs, w in entries:
                if not (0 <= obs < self.num_observed):
                    raise UsageError(f"JointMapping: observed index {obs} out of range")
                if w <= 0:
                    raise UsageError("JointMapping: weights must be > 0")
        if not (0 <= self.root_proxy < self.num_observed):
            raise UsageError("JointMapping: root_proxy out of range")

    @property
    def mapped_joints(self) -> tuple:
        return tuple(j for j, _ in self.groups)


def identity_mapping(num_joints: int = NUM_JOINTS) -> JointMapping:
    """Observed point k is model joint k."""
    groups = tuple((j, ((j, 1.0),)) for j in range(num_joints))
    return JointMapping(groups=groups, num_observed=num_joints, root_proxy=0)


def undercomplete_mapping() -> JointMapping:
    """17 observed points onto their model joints; 5 joints unobserved."""
    groups = tuple(
        (j, ((k, 1.0),)) for k, j in enumerate(UNDERCOMPLETE_17_JOINTS)
    )
    return JointMapping(groups=groups, num_observed=17, root_proxy=0)


def overcomplete_mapping() -> JointMapping:
    """54 markers onto 22 joints; cluster markers average to the joint."""
    by_joint: dict = {}
    for m, (j, _) in enumerate(overcomplete_layout()):
        by_joint.setdefault(j, []).append((m, 1.0))
    groups = tuple((j, tuple(entries)) for j, entries in sorted(by_joint.items()))
    return JointMapping(groups=groups, num_observed=54, root_proxy=0)


@dataclass(frozen=True)
class FitWeights:
    """Loss term weights. w_reg_bone weights the ground-contact term (bone
    lengths are already constant because beta is shared across frames)."""

    w_rec: float = 1.0
    w_prior: float = 1e-4
    w_reg_shape: float = 1e-5
    w_reg_smooth: float = 0.03
    w_reg_bone: float = 0.1

    def __post_init__(self):
        vals = (self.w_rec, self.w_prior, self.w_reg_shape, self.w_reg_smooth, self.w_reg_bone)
        if any((not np.isfinite(v)) or v < 0 for v in vals):
            raise UsageError("FitWeights: weights must be finite and >= 0")
        if self.w_rec <= 0:
            raise UsageError("FitWeights: w_rec must be > 0")


@dataclass(frozen=True)
class FitOptions:
    max_iters: int = 300
    lr: float = 0.06
    rel_tol: float = 1e-5
    patience: int = 20

    def __post_init__(self):
        if self.max_iters < 1 or self.lr <= 0 or self.rel_tol <= 0 or self.patience < 1:
            raise UsageError("FitOptions: invalid optimizer settings")


@dataclass
class FitResult:
    """Outcome of one sequence fit (failed=True means NaN abort, params at
    the last finite state and the sequence is excluded downstream)."""

    params: ParamSequence
    total_loss: float
    loss_parts: dict
    iterations: int
    converged: bool
    failed: bool
    failure_reason: str
    per_frame_rmse: np.ndarray  # (T,)
    rmse: float
    prior_kind: str
    seed: int
    wall_seconds: float
    fps: float = 0.0  # frame rate of the observed sequence


def _targets_from_mapping(observed: MotionSequence, mapping: JointMapping):
    """Per-joint target tracks (T, M, 3) plus the mapped joint index list."""
    frames = observed.frames
    joints = []
    targets = []
    for joint, entries in mapping.groups:
        idx = np.array([e[0] for e in entries])
        w = np.array([e[1] for e in entries])
        w = w / w.sum()
        joints.append(joint)
        targets.append(np.einsum("tmc,m->tc", frames[:, idx, :], w))
    return np.array(joints, dtype=np.int64), np.stack(targets, axis=1)


def reconstruction_loss(
    params: ParamSequence,
    observed: MotionSequence,
    mapping: JointMapping,
    skel: Skeleton,
):
    """Mean squared joint-to-target distance and its parameter gradients."""
    if observed.num_points != mapping.num_observed:
        raise UsageError(
            f"reconstruction_loss: sequence has {observed.num_points} points, "
            f"mapping expects {mapping.num_observed}"
        )
    pos, cache = fk_with_cache(skel, params)
    joints, targets = _targets_from_mapping(observed, mapping)
    diff = pos[:, joints, :] - targets
    t, m = diff.shape[0], diff.shape[1]
    loss = float(np.sum(diff * diff)) / (t * m)
    dpos = np.zeros_like(pos)
    dpos[:, joints, :] = 2.0 * diff / (t * m)
    grads = fk_backward(skel, cache, dpos)
    return loss, grads


@dataclass
class ConsistencyTerms:
    shape: float
    smooth: float
    ground: float

    @property
    def total(self) -> float:
        return self.shape + self.smooth + self.ground


def consistency_regularizer(params: ParamSequence, skel: Skeleton):
    """Unweighted consistency terms and per-term gradients.

    shape: ||beta||^2. smooth: mean squared frame-to-frame jump of pose
    components (over 63 (T-1) entries) plus root components (over 3 (T-1)).
    ground: mean over frames of relu(-lowest foot z)^2. Returns
    (ConsistencyTerms, grads_shape, grads_smooth, grads_ground)."""
    t = params.num_frames
    shape_val = float(np.sum(params.shape * params.shape))
    g_shape = ParamGrads.zeros(t)
    g_shape.shape[:] = 2.0 * params.shape

    g_smooth = ParamGrads.zeros(t)
    smooth_val = 0.0
    if t > 1:
        dpose = params.pose[1:] - params.pose[:-1]
        droot = params.root[1:] - params.root[:-1]
        n_pose = POSE_DIM * (t - 1)
        n_root = 3 * (t - 1)
        smooth_val = float(np.sum(dpose * dpose)) / n_pose + float(
            np.sum(droot * droot)
        ) / n_root
        g_smooth.pose[1:] += 2.0 * dpose / n_pose
        g_smooth.pose[:-1] -= 2.0 * dpose / n_pose
        g_smooth.root[1:] += 2.0 * droot / n_root
        g_smooth.root[:-1] -= 2.0 * droot / n_root

    pos, cache = fk_with_cache(skel, params)
    foot_idx = np.array(FOOT_JOINTS)
    foot_z = pos[:, foot_idx, 2]
    lowest = foot_z.min(axis=1)
    which = foot_idx[np.argmin(foot_z, axis=1)]
    pen = np.maximum(0.0, -lowest)
    ground_val = float(np.mean(pen * pen))
    dpos = np.zeros_like(pos)
    rows = np.arange(t)
    dpos[rows, which, 2] = -2.0 * pen / t
    g_ground = fk_backward(skel, cache, dpos)

    return ConsistencyTerms(shape_val, smooth_val, ground_val), g_shape, g_smooth, g_ground


def prior_loss(model, params: ParamSequence):
    """Latent prior penalty of the pose track; gradient lands on pose only."""
    t = params.num_frames
    val, dtheta = latent_prior_penalty(model, params.pose.reshape(t, POSE_DIM))
    grads = ParamGrads.zeros(t)
    grads.pose[:] = dtheta.reshape(t, NUM_BODY_JOINTS, 3)
    return val, grads


def _init_shape_from_bones(
    targets: np.ndarray, joints: np.ndarray, skel: Skeleton
) -> np.ndarray:
    """Closed-form shape initialization from observed bone lengths.

    For every bone whose child and parent joints are both observed, the median
    frame distance between their targets estimates the scaled bone length;
    ridge least squares on the linear shape basis then recovers beta. Bones
    not covered by the mapping simply drop out of the system. This lands the
    optimizer near the true skeleton and avoids the slow pose-vs-shape valley.
    """
    col = {int(j): k for k, j in enumerate(joints)}
    rows = []
    rhs = []
    for j in range(1, skel.num_joints):
        p = int(skel.parents[j])
        if j not in col or p not in col:
            continue
        rest = float(np.linalg.norm(skel.offsets[j]))
        if rest < 1e-9:
            continue
        dist = np.linalg.norm(targets[:, col[j], :] - targets[:, col[p], :], axis=1)
        scale = float(np.median(dist)) / rest
        rows.append(skel.shape_basis[j])
        rhs.append(scale - 1.0)
    if not rows:
        return np.zeros(SHAPE_DIM)
    a = np.asarray(rows)
    b = np.asarray(rhs)
    lam = 1e-3
    beta = np.linalg.solve(a.T @ a + lam * np.eye(SHAPE_DIM), a.T @ b)
    return np.clip(beta, -3.0, 3.0)


def _pack(params: ParamSequence) -> np.ndarray:
    return np.concatenate(
        [params.root.ravel(), params.root_orient.ravel(), params.pose.ravel(), params.shape]
    )


def _unpack(vec: np.ndarray, t: int) -> ParamSequence:
    n3 = t * 3
    return ParamSequence(
        root=vec[:n3].reshape(t, 3).copy(),
        root_orient=vec[n3 : 2 * n3].reshape(t, 3).copy(),
        pose=vec[2 * n3 : 2 * n3 + t * POSE_DIM].reshape(t, NUM_BODY_JOINTS, 3).copy(),
        shape=vec[-SHAPE_DIM:].copy(),
    )


def _pack_grads(g: ParamGrads) -> np.ndarray:
    return np.concatenate([g.root.ravel(), g.root_orient.ravel(), g.pose.ravel(), g.shape])


def fit_sequence(
    observed: MotionSequence,
    mapping: JointMapping,
    weights: FitWeights,
    prior,
    skel: Skeleton,
    options: FitOptions = FitOptions(),
    seed: int = 0,
) -> FitResult:
    """Fit body parameters to one observed sequence.

    Fully deterministic given its inputs; `seed` is recorded for provenance
    (nothing in the optimizer draws randomness). Initialization: root at the
    root-proxy track, identity orientation, zero pose, and shape from the
    closed-form bone-length calibration.
    """
    if observed.num_points != mapping.num_observed:
        raise UsageError(
            f"fit_sequence: sequence has {observed.num_points} points, mapping "
            f"expects {mapping.num_observed}"
        )
    t0 = time.time()
    t = observed.num_frames
    joints, targets = _targets_from_mapping(observed, mapping)
    m = len(joints)

    params = ParamSequence.zeros(t)
    params.root[:] = observed.frames[:, mapping.root_proxy, :]
    params.shape[:] = _init_shape_from_bones(targets, joints, skel)

    vec = _pack(params)
    adam = AdamState.for_dim(vec.size, lr=options.lr)

    prev_loss = np.inf
    still = 0
    iterations = 0
    converged = False
    failed = False
    reason = ""
    parts = {}
    total = np.inf

    for it in range(options.max_iters):
        iterations = it + 1
        params = _unpack(vec, t)
        pos, cache = fk_with_cache(skel, params)

        # reconstruction + ground share one FK backward pass
        diff = pos[:, joints, :] - targets
        rec = float(np.sum(diff * diff)) / (t * m)
        dpos = np.zeros_like(pos)
        dpos[:, joints, :] = weights.w_rec * 2.0 * diff / (t * m)

        foot_idx = np.array(FOOT_JOINTS)
        foot_z = pos[:, foot_idx, 2]
        lowest = foot_z.min(axis=1)
        which = foot_idx[np.argmin(foot_z, axis=1)]
        pen = np.maximum(0.0, -lowest)
        ground = float(np.mean(pen * pen))
        dpos[np.arange(t), which, 2] += weights.w_reg_bone * (-2.0 * pen / t)

        grads = fk_backward(skel, cache, dpos)

        # smoothness and shape act on parameters directly
        shape_val = float(np.sum(params.shape * params.shape))
        grads.shape += weights.w_reg_shape * 2.0 * params.shape
        smooth_val = 0.0
        if t > 1:
            dpose_j = params.pose[1:] - params.pose[:-1]
            droot_j = params.root[1:] - params.root[:-1]
            n_pose = POSE_DIM * (t - 1)
            n_root = 3 * (t - 1)
            smooth_val = float(np.sum(dpose_j * dpose_j)) / n_pose + float(
                np.sum(droot_j * droot_j)
            ) / n_root
            grads.pose[1:] += weights.w_reg_smooth * 2.0 * dpose_j / n_pose
            grads.pose[:-1] -= weights.w_reg_smooth * 2.0 * dpose_j / n_pose
            grads.root[1:] += weights.w_reg_smooth * 2.0 * droot_j / n_root
            grads.root[:-1] -= weights.w_reg_smooth * 2.0 * droot_j / n_root

        pri = 0.0
        if weights.w_prior > 0.0 and prior is not None:
            pri, dtheta = latent_prior_penalty(prior, params.pose.reshape(t, POSE_DIM))
            grads.pose += weights.w_prior * dtheta.reshape(t, NUM_BODY_JOINTS, 3)

        total = (
            weights.w_rec * rec
            + weights.w_prior * pri
            + weights.w_reg_shape * shape_val
            + weights.w_reg_smooth * smooth_val
            + weights.w_reg_bone * ground
        )
        parts = {
            "rec": weights.w_rec * rec,
            "prior": weights.w_prior * pri,
            "shape": weights.w_reg_shape * shape_val,
            "smooth": weights.w_reg_smooth * smooth_val,
            "ground": weights.w_reg_bone * ground,
        }

        if not np.isfinite(total):
            failed = True
            reason = f"non-finite loss at iteration {iterations}"
            break

        gvec = _pack_grads(grads)
        if not np.all(np.isfinite(gvec)):
            failed = True
            reason = f"non-finite gradient at iteration {iterations}"
            break

        vec = adam_step(adam, vec, gvec)

        # wrap angle blocks to their shortest representative
        n3 = t * 3
        vec[n3 : 2 * n3] = wrap_axis_angle(vec[n3 : 2 * n3].reshape(t, 3)).ravel()
        vec[2 * n3 : 2 * n3 + t * POSE_DIM] = wrap_axis_angle(
            vec[2 * n3 : 2 * n3 + t * POSE_DIM].reshape(t * NUM_BODY_JOINTS, 3)
        ).ravel()

        rel = abs(prev_loss - total) / max(abs(prev_loss), 1e-12)
        if rel < options.rel_tol:
            still += 1
            if still >= options.patience:
                converged = True
                break
        else:
            still = 0
        prev_loss = total

    params = _unpack(vec, t)
    if not np.all(np.isfinite(_pack(params))):
        failed = True
        reason = reason or f"non-finite parameters at iteration {iterations}"

    pos, _ = fk_with_cache(skel, params) if not failed else (None, None)
    if failed:
        per_frame = np.full(t, np.nan)
        rmse = float("nan")
    else:
        diff = pos[:, joints, :] - targets
        per_frame = np.sqrt(np.mean(np.sum(diff * diff, axis=2), axis=1))
        rmse = float(np.sqrt(np.mean(np.sum(diff * diff, axis=2))))

    return FitResult(
        params=params,
        total_loss=float(total),
        loss_parts=parts,
        iterations=iterations,
        converged=converged,
        failed=failed,
        failure_reason=reason,
        per_frame_rmse=per_frame,
        rmse=rmse,
        prior_kind=getattr(prior, "kind", "none"),
        seed=seed,
        wall_seconds=time.time() - t0,
        fps=observed.fps,
    )


@dataclass
class FitCollection:
    """Fits for a whole corpus, aligned with corpus sequence order, plus the
    exclusion bookkeeping (kept + failed = corpus size always)."""

    results: list
    failed_indices: list
    prior_kind: str
    weights: FitWeights
    options: FitOptions

    @property
    def kept_indices(self) -> list:
        failed = set(self.failed_indices)
        return [i for i in range(len(self.results)) if i not in failed]

    @property
    def num_failed(self) -> int:
        return len(self.failed_indices)


def fit_corpus(
    sequences: list,
    mapping: JointMapping,
    weights: FitWeights,
    prior,
    skel: Skeleton,
    options: FitOptions = FitOptions(),
    base_seed: int = 0,
    progress=None,
) -> FitCollection:
    """Fit every sequence; failures are recorded and excluded, never raised."""
    results = []
    failed = []
    for i, seq in enumerate(sequences):
        res = fit_sequence(seq, mapping, weights, prior, skel, options, seed=base_seed + i)
        results.append(res)
        if res.failed:
            failed.append(i)
        if progress is not None:
            progress(i, len(sequences), res)
    return FitCollection(
        results=results,
        failed_indices=failed,
        prior_kind=getattr(prior, "kind", "none"),
        weights=weights,
        options=options,
    )


def grid_search_weights(
    sequences: list,
    mapping: JointMapping,
    prior,
    skel: Skeleton,
    grid: list,
    sample_seed: int,
    sample_size: int = 10,
    options: FitOptions = FitOptions(),
):
    """Pick loss weights by mean RMSE over a seeded sample of sequences.

    Every candidate must fit the whole sample without failures; candidates
    with failures are discarded, and if all fail a ConfigurationError names
    the grid. Returns (best FitWeights, table of (weights, mean rmse, fails)).
    """
    if not grid:
        raise UsageError("grid_search_weights: empty grid")
    from .numerics import SeededRng

    rng = SeededRng(sample_seed)
    idx = rng.permutation(len(sequences))[: min(sample_size, len(sequences))]
    sample = [sequences[int(i)] for i in idx]

    table = []
    best = None
    best_rmse = np.inf
    for weights in grid:
        rmses = []
        fails = 0
        for seq in sample:
            res = fit_sequence(seq, mapping, weights, prior, skel, options)
            if res.failed:
                fails += 1
            else:
                rmses.append(res.rmse)
        mean_rmse = float(np.mean(rmses)) if rmses else float("inf")
        table.append((weights, mean_rmse, fails))
        if fails == 0 and mean_rmse < best_rmse:
            best_rmse = mean_rmse
            best = weights
    if best is None:
        raise ConfigurationError(
            "grid_search_weights: every candidate produced fit failures"
        )
    return best, table
