"""Simplified SMPL-like body model: 22 joints, axis-angle pose, linear shape.

Parameterization per frame: root translation r (3,), root orientation Phi
(3, axis-angle), body pose Theta (21, 3, axis-angle per non-root joint), and
one shared shape vector beta (16,) that scales bone offsets linearly.

Forward kinematics walks the tree:

    G_root = R(Phi),              p_root = r
    G_j    = G_parent R(theta_j), p_j    = p_parent + G_parent offset_j(beta)

The backward pass accumulates dL/dp into analytic gradients for every
parameter in reverse topological order, batched over frames, so fitting never
needs numeric differentiation.

Axes: +z up, +y walking direction, +x to the subject's left. Ground is z = 0.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DataError, FileFormatError, ShapeError, UsageError

NUM_JOINTS = 22
NUM_BODY_JOINTS = 21  # all joints except the root
POSE_DIM = NUM_BODY_JOINTS * 3
SHAPE_DIM = 16

JOINT_NAMES = (
    "pelvis",         # 0
    "left_hip",       # 1
    "right_hip",      # 2
    "spine1",         # 3
    "left_knee",      # 4
    "right_knee",     # 5
    "spine2",         # 6
    "left_ankle",     # 7
    "right_ankle",    # 8
    "spine3",         # 9
    "left_foot",      # 10
    "right_foot",     # 11
    "neck",           # 12
    "left_collar",    # 13
    "right_collar",   # 14
    "head",           # 15
    "left_shoulder",  # 16
    "right_shoulder", # 17
    "left_elbow",     # 18
    "right_elbow",    # 19
    "left_wrist",     # 20
    "right_wrist",    # 21
)

PARENTS = (-1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 9, 9, 12, 13, 14, 16, 17, 18, 19)

RIGHT_FOOT_INDEX = 11
FOOT_JOINTS = (10, 11)
# joints whose own rotation moves no other joint; their angles are
# unobservable from positions and get pinned by the prior during fitting
LEAF_JOINTS = (10, 11, 15, 20, 21)

# rest offsets in meters, child relative to parent (root row is zero)
_OFFSETS = (
    (0.0, 0.0, 0.0),       # pelvis
    (0.09, 0.0, -0.06),    # left_hip
    (-0.09, 0.0, -0.06),   # right_hip
    (0.0, 0.0, 0.11),      # spine1
    (0.0, 0.0, -0.42),     # left_knee
    (0.0, 0.0, -0.42),     # right_knee
    (0.0, 0.0, 0.13),      # spine2
    (0.0, 0.0, -0.43),     # left_ankle
    (0.0, 0.0, -0.43),     # right_ankle
    (0.0, 0.0, 0.13),      # spine3
    (0.0, 0.13, -0.06),    # left_foot
    (0.0, 0.13, -0.06),    # right_foot
    (0.0, 0.0, 0.11),      # neck
    (0.05, 0.0, 0.07),     # left_collar
    (-0.05, 0.0, 0.07),    # right_collar
    (0.0, 0.0, 0.12),      # head
    (0.12, 0.0, 0.0),      # left_shoulder
    (-0.12, 0.0, 0.0),     # right_shoulder
    (0.0, 0.0, -0.27),     # left_elbow
    (0.0, 0.0, -0.27),     # right_elbow
    (0.0, 0.0, -0.26),     # left_wrist
    (0.0, 0.0, -0.26),     # right_wrist
)


def _build_shape_basis() -> np.ndarray:
    """(22, 16) sensitivities: bone scale_j = 1 + sum_k basis[j, k] * beta_k."""
    b = np.zeros((NUM_JOINTS, SHAPE_DIM))

    def put(component, joints, value):
        for j in joints:
            b[j, component] += value

    put(0, range(1, NUM_JOINTS), 0.05)          # global size
    put(1, (4, 5, 7, 8), 0.05)                  # leg length
    put(2, (3, 6, 9), 0.05)                     # torso length
    put(3, (18, 19, 20, 21), 0.05)              # arm length
    put(4, (13, 14, 16, 17), 0.04)              # shoulder width
    put(5, (1, 2), 0.04)                        # hip width
    put(6, (4, 5), 0.04)                        # thigh vs shank
    put(6, (7, 8), -0.04)
    put(7, (12, 15), 0.04)                      # neck and head
    put(8, (10, 11), 0.05)                      # foot size
    put(9, (18, 19), 0.04)                      # upper arm vs forearm
    put(9, (20, 21), -0.04)
    put(10, (1, 2, 3), 0.02)                    # pelvis block
    put(11, (3,), 0.04)                         # spine distribution
    put(11, (9,), -0.04)
    put(12, (4, 7), 0.02)                       # leg asymmetry
    put(12, (5, 8), -0.02)
    put(13, (18, 20), 0.02)                     # arm asymmetry
    put(13, (19, 21), -0.02)
    put(14, (12, 13, 14), 0.03)                 # collar height
    put(15, (4, 5, 7, 8, 18, 19, 20, 21), 0.02) # limbs vs torso
    put(15, (3, 6, 9), -0.02)
    return b


# point sets used by the observation remappings (defined here because they are
# skeleton-level vocabulary shared by the data generator and the fitter)
UNDERCOMPLETE_17_JOINTS = (0, 1, 2, 4, 5, 7, 8, 9, 10, 11, 12, 16, 17, 18, 19, 20, 21)
# joints that get a 3-marker cluster in the 54-point overcomplete layout;
# the rest get a single marker. 16 * 3 + 6 = 54.
OVERCOMPLETE_CLUSTER_JOINTS = (0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 12, 15, 16, 17, 18, 19)
OVERCOMPLETE_MARKER_OFFSET = np.array([0.025, 0.0, 0.0])


def overcomplete_layout() -> list[tuple[int, np.ndarray]]:
    """Ordered 54-marker layout: (model joint, world-frame offset) per marker.

    Cluster joints carry (joint, joint+d, joint-d); the +-d pair averages away,
    so the per-joint mean of a cluster equals the joint position exactly.
    """
    layout = []
    d = OVERCOMPLETE_MARKER_OFFSET
    for j in range(NUM_JOINTS):
        if j in OVERCOMPLETE_CLUSTER_JOINTS:
            layout.append((j, np.zeros(3)))
            layout.append((j, d.copy()))
            layout.append((j, -d.copy()))
        else:
            layout.append((j, np.zeros(3)))
    return layout


@dataclass(frozen=True)
class Skeleton:
    """Joint tree with per-bone rest offsets and a linear shape basis.

    parents[0] == -1 and parents[j] < j for j >= 1, so joint order is already
    topological; validation enforces it.
    """

    joint_names: tuple
    parents: np.ndarray      # (J,) int
    offsets: np.ndarray      # (J, 3)
    shape_basis: np.ndarray  # (J, 16)
    right_foot_index: int

    def __post_init__(self):
        j = len(self.joint_names)
        if j < 2:
            raise UsageError("Skeleton: need at least 2 joints")
        if self.parents.shape != (j,):
            raise UsageError(f"Skeleton: parents shape {self.parents.shape} != ({j},)")
        if self.offsets.shape != (j, 3):
            raise UsageError(f"Skeleton: offsets shape {self.offsets.shape} != ({j}, 3)")
        if self.shape_basis.shape != (j, SHAPE_DIM):
            raise UsageError(
                f"Skeleton: shape_basis shape {self.shape_basis.shape} != ({j}, {SHAPE_DIM})"
            )
        if self.parents[0] != -1:
            raise UsageError("Skeleton: parents[0] must be -1")
        for k in range(1, j):
            if not (0 <= self.parents[k] < k):
                raise UsageError(
                    f"Skeleton: parents[{k}]={self.parents[k]} breaks topological order"
                )
        if not (0 <= self.right_foot_index < j):
            raise UsageError(f"Skeleton: right_foot_index {self.right_foot_index} out of range")
        if np.any(self.offsets[0] != 0.0):
            raise UsageError("Skeleton: root offset must be zero")

    @property
    def num_joints(self) -> int:
        return len(self.joint_names)


@lru_cache(maxsize=1)
def default_skeleton() -> Skeleton:
    return Skeleton(
        joint_names=JOINT_NAMES,
        parents=np.array(PARENTS, dtype=np.int64),
        offsets=np.array(_OFFSETS, dtype=np.float64),
        shape_basis=_build_shape_basis(),
        right_foot_index=RIGHT_FOOT_INDEX,
    )


def save_skeleton(path: str, skel: Skeleton) -> None:
    doc = {
        "joints": list(skel.joint_names),
        "parents": [int(p) for p in skel.parents],
        "offsets": [[float(v) for v in row] for row in skel.offsets],
        "shape_basis": [[float(v) for v in row] for row in skel.shape_basis],
        "right_foot_index": int(skel.right_foot_index),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_skeleton(path: str) -> Skeleton:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise FileFormatError(f"skeleton file {path}: {exc}") from exc
    for key in ("joints", "parents", "offsets", "shape_basis", "right_foot_index"):
        if key not in doc:
            raise FileFormatError(f"skeleton file {path}: missing key '{key}'")
    try:
        return Skeleton(
            joint_names=tuple(str(n) for n in doc["joints"]),
            parents=np.array(doc["parents"], dtype=np.int64),
            offsets=np.array(doc["offsets"], dtype=np.float64),
            shape_basis=np.array(doc["shape_basis"], dtype=np.float64),
            right_foot_index=int(doc["right_foot_index"]),
        )
    except UsageError as exc:
        raise FileFormatError(f"skeleton file {path}: {exc}") from exc


# === parameter containers ===


@dataclass
class BodyParams:
    """Single-frame body parameters."""

    root: np.ndarray         # (3,)
    root_orient: np.ndarray  # (3,)
    pose: np.ndarray         # (21, 3)
    shape: np.ndarray        # (16,)


@dataclass
class ParamSequence:
    """Frame-stacked body parameters with one shared shape vector.

    The shared beta is structural: there is no per-frame shape array, so any
    consumer of a ParamSequence gets sequence-constant bone lengths for free.
    """

    root: np.ndarray         # (T, 3)
    root_orient: np.ndarray  # (T, 3)
    pose: np.ndarray         # (T, 21, 3)
    shape: np.ndarray        # (16,)

    def __post_init__(self):
        t = self.root.shape[0]
        if self.root.shape != (t, 3) or self.root_orient.shape != (t, 3):
            raise UsageError("ParamSequence: root/root_orient must be (T, 3)")
        if self.pose.shape != (t, NUM_BODY_JOINTS, 3):
            raise UsageError(
                f"ParamSequence: pose shape {self.pose.shape} != ({t}, {NUM_BODY_JOINTS}, 3)"
            )
        if self.shape.shape != (SHAPE_DIM,):
            raise UsageError(f"ParamSequence: shape must be ({SHAPE_DIM},)")

    @property
    def num_frames(self) -> int:
        return int(self.root.shape[0])

    def frame(self, t: int) -> BodyParams:
        return BodyParams(
            root=self.root[t].copy(),
            root_orient=self.root_orient[t].copy(),
            pose=self.pose[t].copy(),
            shape=self.shape.copy(),
        )

    def copy(self) -> "ParamSequence":
        return ParamSequence(
            root=self.root.copy(),
            root_orient=self.root_orient.copy(),
            pose=self.pose.copy(),
            shape=self.shape.copy(),
        )

    @classmethod
    def zeros(cls, t: int) -> "ParamSequence":
        return cls(
            root=np.zeros((t, 3)),
            root_orient=np.zeros((t, 3)),
            pose=np.zeros((t, NUM_BODY_JOINTS, 3)),
            shape=np.zeros(SHAPE_DIM),
        )


@dataclass
class MotionSequence:
    """Observed 3-d point trajectories at a fixed frame rate.

    frames: (T, P, 3) meters. P is whatever the observing system produced
    (22 model joints, a 17-point subset, a 54-marker cluster set, ...).
    """

    frames: np.ndarray
    fps: float
    subject_id: str
    action: str

    def __post_init__(self):
        if self.frames.ndim != 3 or self.frames.shape[2] != 3:
            raise UsageError(
                f"MotionSequence: frames must be (T, P, 3), got {self.frames.shape}"
            )
        if self.fps <= 0:
            raise UsageError(f"MotionSequence: fps must be > 0, got {self.fps}")
        if not np.all(np.isfinite(self.frames)):
            raise DataError("MotionSequence: frames contain non-finite values")

    @property
    def num_frames(self) -> int:
        return int(self.frames.shape[0])

    @property
    def num_points(self) -> int:
        return int(self.frames.shape[1])


# === rotations ===

_EYE3 = np.eye(3)
# E[i] = [e_i]_x, the cross-product matrices of the basis vectors
_E = np.zeros((3, 3, 3))
_E[0] = [[0, 0, 0], [0, 0, -1], [0, 1, 0]]
_E[1] = [[0, 0, 1], [0, 0, 0], [-1, 0, 0]]
_E[2] = [[0, -1, 0], [1, 0, 0], [0, 0, 0]]

_SMALL_THETA = 1e-4


def _cross_matrix(v: np.ndarray) -> np.ndarray:
    """[v]_x for v of shape (..., 3) -> (..., 3, 3)."""
    out = np.zeros(v.shape[:-1] + (3, 3))
    x, y, z = v[..., 0], v[..., 1], v[..., 2]
    out[..., 0, 1] = -z
    out[..., 0, 2] = y
    out[..., 1, 0] = z
    out[..., 1, 2] = -x
    out[..., 2, 0] = -y
    out[..., 2, 1] = x
    return out


def axis_angle_to_matrix(v: np.ndarray) -> np.ndarray:
    """Rodrigues: R = I + a [v]_x + b [v]_x^2, a = sin t / t, b = (1-cos t)/t^2,
    with Taylor series below t = 1e-4 to keep gradients smooth at zero.
    Accepts (..., 3), returns (..., 3, 3)."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape[-1] != 3:
        raise UsageError(f"axis_angle_to_matrix: last dim must be 3, got {v.shape}")
    t2 = np.sum(v * v, axis=-1)
    t = np.sqrt(t2)
    small = t < _SMALL_THETA
    ts = np.where(small, 1.0, t)  # safe divisor
    a = np.where(small, 1.0 - t2 / 6.0, np.sin(ts) / ts)
    b = np.where(small, 0.5 - t2 / 24.0, (1.0 - np.cos(ts)) / (ts * ts))
    k = _cross_matrix(v)
    k2 = k @ k
    return _EYE3 + a[..., None, None] * k + b[..., None, None] * k2


def axis_angle_jacobian(v: np.ndarray) -> np.ndarray:
    """dR/dv for v (..., 3): returns (..., 3, 3, 3) with [..., i, :, :] = dR/dv_i.

        dR/dv_i = g1 v_i [v]_x + a E_i + g2 v_i [v]_x^2 + b (E_i [v]_x + [v]_x E_i)

    with g1 = (t cos t - sin t)/t^3 and g2 = (t sin t - 2(1-cos t))/t^4, both
    replaced by their series (-1/3 + t^2/30, -1/12 + t^2/180) near zero.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.shape[-1] != 3:
        raise UsageError(f"axis_angle_jacobian: last dim must be 3, got {v.shape}")
    t2 = np.sum(v * v, axis=-1)
    t = np.sqrt(t2)
    small = t < _SMALL_THETA
    ts = np.where(small, 1.0, t)
    a = np.where(small, 1.0 - t2 / 6.0, np.sin(ts) / ts)
    b = np.where(small, 0.5 - t2 / 24.0, (1.0 - np.cos(ts)) / (ts * ts))
    g1 = np.where(
        small, -1.0 / 3.0 + t2 / 30.0, (ts * np.cos(ts) - np.sin(ts)) / (ts ** 3)
    )
    g2 = np.where(
        small,
        -1.0 / 12.0 + t2 / 180.0,
        (ts * np.sin(ts) - 2.0 * (1.0 - np.cos(ts))) / (ts ** 4),
    )
    k = _cross_matrix(v)
    k2 = k @ k
    # E_i K and K E_i as broadcast matmuls over the inserted i axis
    kx = k[..., None, :, :]
    ek = _E @ kx
    ke = kx @ _E
    jac = (
        (g1[..., None] * v)[..., :, None, None] * kx
        + a[..., None, None, None] * _E
        + (g2[..., None] * v)[..., :, None, None] * k2[..., None, :, :]
        + b[..., None, None, None] * (ek + ke)
    )
    return jac


def wrap_axis_angle(v: np.ndarray) -> np.ndarray:
    """Wrap axis-angle vectors to rotation angle in [-pi, pi) (same rotation,
    shortest representative). Shape-preserving on (..., 3)."""
    v = np.asarray(v, dtype=np.float64)
    t = np.linalg.norm(v, axis=-1)
    tw = t - 2.0 * np.pi * np.floor((t + np.pi) / (2.0 * np.pi))
    scale = np.where(t > 1e-12, tw / np.where(t > 1e-12, t, 1.0), 1.0)
    return v * scale[..., None]


# === forward kinematics ===


def scaled_offsets(skel: Skeleton, shape: np.ndarray) -> np.ndarray:
    """Bone offsets scaled by the linear shape basis; validates the guard
    |beta_i| <= 5 and positive bone lengths."""
    shape = np.asarray(shape, dtype=np.float64)
    if shape.shape != (SHAPE_DIM,):
        raise UsageError(f"scaled_offsets: shape must be ({SHAPE_DIM},)")
    if np.any(np.abs(shape) > 5.0):
        raise UsageError("scaled_offsets: |beta_i| must be <= 5")
    scales = 1.0 + skel.shape_basis @ shape
    if np.any(scales[1:] <= 0.0):
        bad = int(np.argmax(scales[1:] <= 0.0)) + 1
        raise ShapeError(
            f"shape produces non-positive length for bone '{skel.joint_names[bad]}'"
        )
    return skel.offsets * scales[:, None]


def rest_skeleton(skel: Skeleton, shape: np.ndarray) -> np.ndarray:
    """Joint positions (J, 3) at rest pose (identity rotations, root at origin)."""
    offs = scaled_offsets(skel, shape)
    pos = np.zeros((skel.num_joints, 3))
    for j in range(1, skel.num_joints):
        pos[j] = pos[skel.parents[j]] + offs[j]
    return pos


def bone_lengths(positions: np.ndarray, skel: Skeleton) -> np.ndarray:
    """Per-bone lengths (J-1,) from joint positions (..., J, 3), bones ordered
    by child joint index 1..J-1."""
    child = positions[..., 1:, :]
    parent = positions[..., np.asarray(skel.parents[1:]), :]
    return np.linalg.norm(child - parent, axis=-1)


@dataclass
class FkCache:
    """Intermediates of one FK forward pass, consumed by fk_backward."""

    rotations: np.ndarray   # (T, J, 3, 3) local rotations
    globals_: np.ndarray    # (T, J, 3, 3) accumulated rotations
    offsets: np.ndarray     # (J, 3) shape-scaled offsets
    axis_angles: np.ndarray # (T, J, 3) local axis-angle (root orient in row 0)


def fk_with_cache(skel: Skeleton, params: ParamSequence) -> tuple[np.ndarray, FkCache]:
    t = params.num_frames
    j = skel.num_joints
    offs = scaled_offsets(skel, params.shape)
    aa = np.concatenate([params.root_orient[:, None, :], params.pose], axis=1)
    rots = axis_angle_to_matrix(aa)  # (T, J, 3, 3)
    glob = np.empty((t, j, 3, 3))
    pos = np.empty((t, j, 3))
    glob[:, 0] = rots[:, 0]
    pos[:, 0] = params.root
    parents = skel.parents
    for k in range(1, j):
        p = parents[k]
        pos[:, k] = pos[:, p] + glob[:, p] @ offs[k]
        glob[:, k] = glob[:, p] @ rots[:, k]
    return pos, FkCache(rotations=rots, globals_=glob, offsets=offs, axis_angles=aa)


def forward_kinematics(skel: Skeleton, params: ParamSequence) -> np.ndarray:
    """Joint positions (T, J, 3) for a parameter sequence."""
    pos, _ = fk_with_cache(skel, params)
    return pos


def fk_single(skel: Skeleton, frame: BodyParams) -> np.ndarray:
    """Joint positions (J, 3) for one frame."""
    seq = ParamSequence(
        root=frame.root[None, :],
        root_orient=frame.root_orient[None, :],
        pose=frame.pose[None, :, :],
        shape=frame.shape,
    )
    return forward_kinematics(skel, seq)[0]


@dataclass
class ParamGrads:
    """Gradients of a scalar loss with respect to ParamSequence fields."""

    root: np.ndarray         # (T, 3)
    root_orient: np.ndarray  # (T, 3)
    pose: np.ndarray         # (T, 21, 3)
    shape: np.ndarray        # (16,)

    def __iadd__(self, other: "ParamGrads") -> "ParamGrads":
        self.root += other.root
        self.root_orient += other.root_orient
        self.pose += other.pose
        self.shape += other.shape
        return self

    def scaled(self, w: float) -> "ParamGrads":
        return ParamGrads(
            root=self.root * w,
            root_orient=self.root_orient * w,
            pose=self.pose * w,
            shape=self.shape * w,
        )

    @classmethod
    def zeros(cls, t: int) -> "ParamGrads":
        return cls(
            root=np.zeros((t, 3)),
            root_orient=np.zeros((t, 3)),
            pose=np.zeros((t, NUM_BODY_JOINTS, 3)),
            shape=np.zeros(SHAPE_DIM),
        )


def fk_backward(skel: Skeleton, cache: FkCache, dpos: np.ndarray) -> ParamGrads:
    """Backpropagate dL/dpositions (T, J, 3) through forward kinematics.

    Walks joints in reverse index order (valid reverse-topological order since
    parents[j] < j), accumulating into parent position/rotation gradients:

        p_j = p_par + G_par o_j  ->  dp_par += dp_j ; dG_par += dp_j o_j^T
        G_j = G_par R_j          ->  dG_par += dG_j R_j^T ; dR_j = G_par^T dG_j

    Local rotation gradients contract against the Rodrigues Jacobian, and
    offset gradients fold through the shape basis into dbeta.
    """
    t, j = dpos.shape[0], skel.num_joints
    if dpos.shape != (t, j, 3):
        raise UsageError(f"fk_backward: dpos shape {dpos.shape} != ({t}, {j}, 3)")
    parents = skel.parents
    glob = cache.globals_
    rots = cache.rotations
    jac = axis_angle_jacobian(cache.axis_angles)  # (T, J, 3, 3, 3)

    dp = dpos.copy()
    dg = np.zeros((t, j, 3, 3))
    doff = np.zeros((j, 3))
    out = ParamGrads.zeros(t)

    jac_flat = jac.reshape(t, j, 3, 9)

    for k in range(j - 1, 0, -1):
        p = parents[k]
        dp[:, p] += dp[:, k]
        dg[:, p] += dp[:, k, :, None] * cache.offsets[k][None, None, :]
        doff[k] = np.tensordot(dp[:, k], glob[:, p], axes=([0, 1], [0, 1]))
        dg[:, p] += dg[:, k] @ rots[:, k].transpose(0, 2, 1)
        drot = glob[:, p].transpose(0, 2, 1) @ dg[:, k]
        out.pose[:, k - 1, :] = (jac_flat[:, k] @ drot.reshape(t, 9, 1))[:, :, 0]

    out.root = dp[:, 0]
    out.root_orient = (jac_flat[:, 0] @ dg[:, 0].reshape(t, 9, 1))[:, :, 0]

    # offsets[j] = skel.offsets[j] * (1 + basis[j] . beta)
    scale_grad = np.einsum("jc,jc->j", doff, skel.offsets)
    out.shape = skel.shape_basis.T @ scale_grad
    return out


def root_translation_from_right_foot(seq: MotionSequence, skel: Skeleton) -> np.ndarray:
    """Right-foot trajectory relative to its first-frame position, (T, 3).

    This is the replacement root track of the anonymization pipeline: the
    first frame is anchored at the origin by construction.
    """
    if seq.num_points != skel.num_joints:
        raise UsageError(
            f"root_translation_from_right_foot: sequence has {seq.num_points} points, "
            f"skeleton has {skel.num_joints} joints"
        )
    rf = seq.frames[:, skel.right_foot_index, :]
    return rf - rf[0]
