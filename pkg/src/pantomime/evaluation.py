"""Experiment harness: baselines, component analysis, dependency analysis,
noise-mode sweep, protection-target tuning, and the privacy-utility report.

Experiments are pure functions of (corpus, model artifacts, seeds, grids);
every report embeds the hashes proving it, and rerunning from the same
snapshot reproduces all tables byte for byte (timestamps excluded).

The six experiments:

  E1/E2 run_baselines        clean identity / action accuracy + permutation control
  E3   component_analysis    identity accuracy with single components kept / removed
  E4   dependency_analysis   mean absolute pairwise correlation per representation
  E5   noise_mode_sweep      attacker + action accuracy over (variant, mode, gamma)
  E6   tune_protection_target  bisection on gamma to hit a target attacker accuracy
       privacy_utility_report  tuned variants: accuracy, displacement, jerk, plots

Privacy numbers always come from the adaptive attacker (recognition module
trains on anonymized data). Anonymizer variants: 'latent-pose' and
'latent-transition' run the full pipeline; 'direct-positions' and
'direct-angles' are the comparison arms with noise in the raw space.
"""

from __future__ import annotations

import dataclasses
import hashlib
import time
from dataclasses import dataclass, field

import numpy as np

from .anonymizer import AnonymizationConfig, DirectNoiseSpec, STATIC, VARIABLE
from .errors import ConfigurationError, UsageError
from .fitting import FitCollection
from .kinematics import MotionSequence, Skeleton, forward_kinematics
from .numerics import SeededRng, child_seed
from .priors import POSE_VAE, TRANSITION_CVAE, encode_poses, encode_transitions, model_hash
from .recognition import (
    TASK_ACTION,
    TASK_IDENTITY,
    balanced_accuracy,
    train_recognizer,
)
from .synthdata import Corpus

LATENT_POSE = "latent-pose"
LATENT_TRANSITION = "latent-transition"
DIRECT_POSITIONS = "direct-positions"
DIRECT_ANGLES = "direct-angles"
VARIANTS = (LATENT_POSE, LATENT_TRANSITION, DIRECT_POSITIONS, DIRECT_ANGLES)

# per-variant gamma grids: noise scales are not comparable across spaces
DEFAULT_GAMMA_GRIDS = {
    LATENT_POSE: (0.25, 0.5, 1.0, 2.0, 4.0),
    LATENT_TRANSITION: (0.25, 0.5, 1.0, 2.0, 4.0),
    DIRECT_POSITIONS: (0.05, 0.1, 0.2, 0.4, 0.8),
    DIRECT_ANGLES: (0.1, 0.2, 0.4, 0.8, 1.6),
}

COMPONENTS = ("shape", "pose", "root", "orient")


@dataclass
class ExperimentReport:
    experiment_id: str
    config: dict
    tables: dict  # name -> {"columns": [...], "rows": [[...], ...]}
    generated_at: str

    def table(self, name: str):
        return self.tables[name]


def _now() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%S")


def fits_hash(fits: FitCollection) -> str:
    """Digest over fitted parameters and exclusion bookkeeping."""
    h = hashlib.sha256()
    h.update(fits.prior_kind.encode())
    h.update(np.asarray(fits.failed_indices, dtype=np.int64).tobytes())
    for r in fits.results:
        h.update(r.params.root.tobytes())
        h.update(r.params.root_orient.tobytes())
        h.update(r.params.pose.tobytes())
        h.update(r.params.shape.tobytes())
    return h.hexdigest()[:16]


@dataclass
class EvalContext:
    """Everything the experiments share: corpus, skeleton, trained priors and
    cached corpus fits per prior, plus the seeds and grids of record."""

    corpus: Corpus
    skel: Skeleton
    pose_model: object = None
    trans_model: object = None
    pose_fits: FitCollection | None = None
    trans_fits: FitCollection | None = None
    split_seed: int = 5
    anon_seed: int = 303
    gamma_grids: dict = field(default_factory=lambda: dict(DEFAULT_GAMMA_GRIDS))
    variance_fraction: float = 0.95

    def snapshot(self) -> dict:
        snap = {
            "corpus": self.corpus.config.name,
            "corpus_hash": self.corpus.content_hash(),
            "split_seed": self.split_seed,
            "anon_seed": self.anon_seed,
            "variance_fraction": self.variance_fraction,
            "gamma_grids": {k: list(v) for k, v in self.gamma_grids.items()},
        }
        if self.pose_model is not None:
            snap["pose_model_hash"] = model_hash(self.pose_model)
        if self.trans_model is not None:
            snap["trans_model_hash"] = model_hash(self.trans_model)
        if self.pose_fits is not None:
            snap["pose_fits_hash"] = fits_hash(self.pose_fits)
        if self.trans_fits is not None:
            snap["trans_fits_hash"] = fits_hash(self.trans_fits)
        return snap

    def arm(self, variant: str, mode: str, gamma: float):
        """(anon object, fits, model) for one anonymizer variant."""
        if variant == LATENT_POSE:
            if self.pose_model is None or self.pose_fits is None:
                raise ConfigurationError("latent-pose variant needs pose_model and pose_fits")
            cfg = AnonymizationConfig(prior=POSE_VAE, mode=mode, gamma=gamma, seed=self.anon_seed)
            return cfg, self.pose_fits, self.pose_model
        if variant == LATENT_TRANSITION:
            if self.trans_model is None or self.trans_fits is None:
                raise ConfigurationError(
                    "latent-transition variant needs trans_model and trans_fits"
                )
            cfg = AnonymizationConfig(
                prior=TRANSITION_CVAE, mode=mode, gamma=gamma, seed=self.anon_seed
            )
            return cfg, self.trans_fits, self.trans_model
        if variant == DIRECT_POSITIONS:
            return DirectNoiseSpec(target="positions", mode=mode, gamma=gamma,
                                   seed=self.anon_seed), None, None
        if variant == DIRECT_ANGLES:
            if self.pose_fits is None:
                raise ConfigurationError("direct-angles variant needs pose_fits")
            return DirectNoiseSpec(target="joint-angles", mode=mode, gamma=gamma,
                                   seed=self.anon_seed), self.pose_fits, None
        raise UsageError(f"unknown anonymizer variant '{variant}'")

    def attacker_accuracy(self, variant: str, mode: str, gamma: float,
                          task: str = TASK_IDENTITY) -> float:
        anon, fits, model = self.arm(variant, mode, gamma)
        _, rep = train_recognizer(
            self.corpus, task, anon=anon, split_seed=self.split_seed,
            fits=fits, prior_model=model, skel=self.skel,
            variance_fraction=self.variance_fraction,
        )
        return rep.test_balanced_accuracy


# === E1/E2 ===


def run_baselines(ctx: EvalContext) -> ExperimentReport:
    """Clean-data identity and action recognition plus a permutation control.

    Single-action corpora skip the action task (marked not-applicable).
    """
    corpus = ctx.corpus
    _, rep_id = train_recognizer(corpus, TASK_IDENTITY, split_seed=ctx.split_seed,
                                 variance_fraction=ctx.variance_fraction)
    rows = [["identity", rep_id.test_balanced_accuracy,
             rep_id.chosen_c, rep_id.chosen_gamma_k, rep_id.num_folds,
             rep_id.num_train, rep_id.num_test]]

    num_actions = len(set(corpus.action_labels))
    rep_act = None
    if num_actions >= 2:
        _, rep_act = train_recognizer(corpus, TASK_ACTION, split_seed=ctx.split_seed,
                                      variance_fraction=ctx.variance_fraction)
        rows.append(["action", rep_act.test_balanced_accuracy,
                     rep_act.chosen_c, rep_act.chosen_gamma_k, rep_act.num_folds,
                     rep_act.num_train, rep_act.num_test])
    else:
        rows.append(["action", "not-applicable", "", "", "", "", ""])

    # permutation control: shuffle identity labels, chance-level accuracy proves
    # the attacker has no side channel
    rng = SeededRng(ctx.split_seed + 977)
    perm = rng.permutation(len(corpus.subject_ids))
    permuted = dataclasses.replace(
        corpus, subject_ids=[corpus.subject_ids[i] for i in perm]
    )
    _, rep_perm = train_recognizer(permuted, TASK_IDENTITY, split_seed=ctx.split_seed,
                                   variance_fraction=ctx.variance_fraction)
    chance = 1.0 / len(set(corpus.subject_ids))
    rows.append(["identity-permuted-labels", rep_perm.test_balanced_accuracy,
                 rep_perm.chosen_c, rep_perm.chosen_gamma_k, rep_perm.num_folds,
                 rep_perm.num_train, rep_perm.num_test])

    cv_rows = []
    for name, rep in (("identity", rep_id), ("action", rep_act),
                      ("identity-permuted-labels", rep_perm)):
        if rep is None:
            continue
        for entry in rep.cv_table:
            cv_rows.append([name, entry["c"], entry["gamma_k"], entry["mean"]])

    return ExperimentReport(
        experiment_id="E1-E2",
        config={**ctx.snapshot(), "chance": chance},
        tables={
            "baselines": {
                "columns": ["task", "balanced_accuracy", "chosen_c", "chosen_gamma_k",
                            "cv_folds", "num_train", "num_test"],
                "rows": rows,
            },
            "cv": {"columns": ["task", "c", "gamma_k", "mean_balanced_accuracy"],
                   "rows": cv_rows},
        },
        generated_at=_now(),
    )


# === E3 ===


def _masked_param_corpus(ctx: EvalContext, fits: FitCollection, keep: tuple) -> Corpus:
    """Rebuild corpus positions from fitted params with only `keep` intact."""
    seqs = []
    ids, subs, acts = [], [], []
    for i in fits.kept_indices:
        params = fits.results[i].params
        t = params.num_frames
        p = dataclasses.replace(
            params,
            root=params.root.copy() if "root" in keep else np.zeros((t, 3)),
            root_orient=params.root_orient.copy() if "orient" in keep else np.zeros((t, 3)),
            pose=params.pose.copy() if "pose" in keep else np.zeros_like(params.pose),
            shape=params.shape.copy() if "shape" in keep else np.zeros_like(params.shape),
        )
        src = ctx.corpus.sequences[i]
        seqs.append(MotionSequence(frames=forward_kinematics(ctx.skel, p), fps=src.fps,
                                   subject_id=src.subject_id, action=src.action))
        ids.append(ctx.corpus.seq_ids[i])
        subs.append(ctx.corpus.subject_ids[i])
        acts.append(ctx.corpus.action_labels[i])
    return dataclasses.replace(ctx.corpus, sequences=seqs, seq_ids=ids,
                               subject_ids=subs, action_labels=acts,
                               params=[fits.results[i].params for i in fits.kept_indices],
                               noise_seeds=[ctx.corpus.noise_seeds[i] for i in fits.kept_indices])


def component_analysis(ctx: EvalContext) -> ExperimentReport:
    """Identity accuracy with single fitted components kept ('only' rows) or
    removed ('without' rows), from the pose-prior fits."""
    if ctx.pose_fits is None:
        raise ConfigurationError("component_analysis needs pose_fits")
    fits = ctx.pose_fits
    chance = 1.0 / len(set(ctx.corpus.subject_ids))
    rows = []

    def run(keep: tuple, label: str):
        sub = _masked_param_corpus(ctx, fits, keep)
        _, rep = train_recognizer(sub, TASK_IDENTITY, split_seed=ctx.split_seed,
                                  variance_fraction=ctx.variance_fraction)
        rows.append([label, rep.test_balanced_accuracy])

    for comp in COMPONENTS:
        run((comp,), f"only-{comp}")
    for comp in COMPONENTS:
        run(tuple(c for c in COMPONENTS if c != comp), f"without-{comp}")
    run((), "all-zeroed")
    run(COMPONENTS, "all-kept")

    return ExperimentReport(
        experiment_id="E3",
        config={**ctx.snapshot(), "chance": chance, "fits": "pose-prior"},
        tables={
            "components": {
                "columns": ["variant", "identity_balanced_accuracy"],
                "rows": rows,
            },
        },
        generated_at=_now(),
    )


# === E4 ===


def mean_abs_correlation(track: np.ndarray) -> float:
    """Mean absolute off-diagonal Pearson correlation across dimensions.

    track: (T, D) over one sequence's frames. Dimensions with zero variance
    carry no correlation information and are excluded.
    """
    track = np.asarray(track, dtype=np.float64)
    if track.ndim != 2 or track.shape[0] < 3:
        raise UsageError("mean_abs_correlation: need (T >= 3, D) track")
    # ptp, not std: a constant dim can report a tiny nonzero std from
    # rounding while centering still produces exact zeros (0/0 below)
    keep = np.ptp(track, axis=0) > 0
    x = track[:, keep]
    if x.shape[1] < 2:
        return 0.0
    xc = x - x.mean(axis=0)
    cov = xc.T @ xc
    denom = np.sqrt(np.outer(np.diag(cov), np.diag(cov)))
    corr = cov / denom
    d = corr.shape[0]
    off = np.abs(corr[~np.eye(d, dtype=bool)])
    return float(np.mean(off))


def dependency_analysis(ctx: EvalContext) -> ExperimentReport:
    """Mean absolute pairwise correlation per representation (E4).

    Rows: positions (observed frames), joint angles (fitted theta), pose
    prior latents, transition prior latents. Columns: which fit collection
    supplied theta. Positions do not depend on fits, so that row repeats.
    Sequences with fewer than 3 usable rows are excluded and counted.

    Latent rows use sampled posterior codes z ~ q(z|theta), seeded per
    sequence. The sampled code is the representation the KL term whitens:
    a collapsed dimension samples unit prior noise, while its posterior
    mean would replay tiny wiggles correlated with the active dimensions
    and overstate the dependency.
    """
    if ctx.pose_fits is None or ctx.trans_fits is None:
        raise ConfigurationError("dependency_analysis needs fits for both priors")
    if ctx.pose_model is None or ctx.trans_model is None:
        raise ConfigurationError("dependency_analysis needs both trained priors")

    excluded = 0
    pos_vals = []
    for seq in ctx.corpus.sequences:
        if seq.num_frames < 3:
            excluded += 1
            continue
        pos_vals.append(mean_abs_correlation(seq.frames.reshape(seq.num_frames, -1)))
    pos_mean = float(np.mean(pos_vals))

    def column(fits: FitCollection, col: int) -> tuple:
        ang, lat_p, lat_t = [], [], []
        for i in fits.kept_indices:
            params = fits.results[i].params
            t = params.num_frames
            if t < 3:
                continue
            theta = params.pose.reshape(t, -1)
            ang.append(mean_abs_correlation(theta))
            rng_p = SeededRng(child_seed(child_seed(ctx.anon_seed, 777 + col), i))
            lat_p.append(mean_abs_correlation(
                encode_poses(ctx.pose_model, theta, mode="sample", rng=rng_p)[2]))
            if t >= 4:  # transition latents have t - 1 rows
                rng_t = SeededRng(child_seed(child_seed(ctx.anon_seed, 779 + col), i))
                lat_t.append(mean_abs_correlation(
                    encode_transitions(ctx.trans_model, theta, mode="sample",
                                       rng=rng_t)[2]))
        return float(np.mean(ang)), float(np.mean(lat_p)), float(np.mean(lat_t))

    ang_p, latp_p, latt_p = column(ctx.pose_fits, 0)
    ang_t, latp_t, latt_t = column(ctx.trans_fits, 1)

    rows = [
        ["positions", pos_mean, pos_mean],
        ["joint-angles", ang_p, ang_t],
        ["pose-prior-latents", latp_p, latp_t],
        ["transition-prior-latents", latt_p, latt_t],
    ]
    return ExperimentReport(
        experiment_id="E4",
        config={**ctx.snapshot(), "excluded_short_sequences": excluded},
        tables={
            "dependency": {
                "columns": ["representation", "pose_prior_fits", "transition_prior_fits"],
                "rows": rows,
            },
        },
        generated_at=_now(),
    )


# === E5 ===


def noise_mode_sweep(ctx: EvalContext, variants=VARIANTS,
                     modes=(STATIC, VARIABLE), include_action: bool = True,
                     progress=None) -> ExperimentReport:
    """Attacker and action accuracy over (variant, mode, gamma) grids."""
    rows = []
    for variant in variants:
        grid = ctx.gamma_grids[variant]
        for mode in modes:
            for gamma in grid:
                acc_id = ctx.attacker_accuracy(variant, mode, gamma, TASK_IDENTITY)
                acc_act = (ctx.attacker_accuracy(variant, mode, gamma, TASK_ACTION)
                           if include_action else "")
                rows.append([variant, mode, gamma, acc_id, acc_act])
                if progress is not None:
                    progress(variant, mode, gamma, acc_id, acc_act)

    # gamma = 0 reference rows (mode irrelevant at zero noise; recorded once)
    for variant in variants:
        acc_id = ctx.attacker_accuracy(variant, STATIC, 0.0, TASK_IDENTITY)
        acc_act = (ctx.attacker_accuracy(variant, STATIC, 0.0, TASK_ACTION)
                   if include_action else "")
        rows.append([variant, "zero", 0.0, acc_id, acc_act])
        if progress is not None:
            progress(variant, "zero", 0.0, acc_id, acc_act)

    return ExperimentReport(
        experiment_id="E5",
        config=ctx.snapshot(),
        tables={
            "sweep": {
                "columns": ["variant", "mode", "gamma",
                            "identity_balanced_accuracy", "action_balanced_accuracy"],
                "rows": rows,
            },
        },
        generated_at=_now(),
    )


# === E6 ===


@dataclass(frozen=True)
class ProtectionTarget:
    accuracy: float
    tolerance: float = 0.02
    gamma_lo: float = 0.0
    gamma_hi: float = 4.0
    max_iters: int = 12
    max_widenings: int = 4

    def __post_init__(self):
        if not (0.0 < self.accuracy < 1.0):
            raise UsageError("ProtectionTarget: accuracy must be in (0, 1)")
        if self.tolerance <= 0 or self.gamma_hi <= self.gamma_lo:
            raise UsageError("ProtectionTarget: invalid tolerance or bounds")


@dataclass
class TunerResult:
    variant: str
    mode: str
    target: float
    tolerance: float
    gamma_star: float
    accuracy: float
    iterations: int
    converged: bool
    failure: str
    trace: list  # rows [step, gamma, accuracy]


def tune_protection_target(ctx: EvalContext, variant: str, target: ProtectionTarget,
                           mode: str = STATIC, progress=None) -> TunerResult:
    """Bisection on gamma until the adaptive attacker hits the target accuracy.

    The attacker is retrained at every probe with a fixed split seed, so the
    objective is a deterministic function of gamma. Brackets widen (gamma_hi
    doubles) up to max_widenings before reporting failure.
    """
    trace = []
    evals = {}

    def probe(gamma: float) -> float:
        if gamma not in evals:
            evals[gamma] = ctx.attacker_accuracy(variant, mode, gamma, TASK_IDENTITY)
            trace.append([len(trace), gamma, evals[gamma]])
            if progress is not None:
                progress(gamma, evals[gamma])
        return evals[gamma]

    lo, hi = target.gamma_lo, target.gamma_hi
    acc_lo = probe(lo)
    if acc_lo < target.accuracy - target.tolerance:
        return TunerResult(variant, mode, target.accuracy, target.tolerance,
                           gamma_star=lo, accuracy=acc_lo, iterations=len(trace),
                           converged=False,
                           failure="target above the zero-noise accuracy", trace=trace)
    if abs(acc_lo - target.accuracy) <= target.tolerance:
        return TunerResult(variant, mode, target.accuracy, target.tolerance,
                           gamma_star=lo, accuracy=acc_lo, iterations=len(trace),
                           converged=True, failure="", trace=trace)

    acc_hi = probe(hi)
    widened = 0
    while acc_hi > target.accuracy - target.tolerance and widened < target.max_widenings:
        if abs(acc_hi - target.accuracy) <= target.tolerance:
            break
        hi *= 2.0
        widened += 1
        acc_hi = probe(hi)
    if acc_hi > target.accuracy + target.tolerance:
        return TunerResult(variant, mode, target.accuracy, target.tolerance,
                           gamma_star=hi, accuracy=acc_hi, iterations=len(trace),
                           converged=False,
                           failure="could not bracket the target within the gamma cap",
                           trace=trace)

    best_gamma, best_acc = min(
        ((g, a) for g, a in evals.items()),
        key=lambda ga: (abs(ga[1] - target.accuracy), ga[0]),
    )
    for _ in range(target.max_iters):
        if abs(best_acc - target.accuracy) <= target.tolerance:
            break
        mid = 0.5 * (lo + hi)
        acc_mid = probe(mid)
        if abs(acc_mid - target.accuracy) < abs(best_acc - target.accuracy):
            best_gamma, best_acc = mid, acc_mid
        if acc_mid > target.accuracy:
            lo = mid
        else:
            hi = mid

    converged = abs(best_acc - target.accuracy) <= target.tolerance
    return TunerResult(variant, mode, target.accuracy, target.tolerance,
                       gamma_star=best_gamma, accuracy=best_acc,
                       iterations=len(trace), converged=converged,
                       failure="" if converged else "tolerance not reached within max iterations",
                       trace=trace)


def tuner_report(ctx: EvalContext, results: list) -> ExperimentReport:
    rows = [[r.variant, r.mode, r.target, r.gamma_star, r.accuracy,
             r.iterations, r.converged, r.failure] for r in results]
    trace_rows = []
    for r in results:
        for step, gamma, acc in r.trace:
            trace_rows.append([r.variant, r.mode, r.target, step, gamma, acc])
    return ExperimentReport(
        experiment_id="E6",
        config=ctx.snapshot(),
        tables={
            "tuned": {
                "columns": ["variant", "mode", "target", "gamma_star",
                            "achieved_accuracy", "probes", "converged", "failure"],
                "rows": rows,
            },
            "trace": {
                "columns": ["variant", "mode", "target", "step", "gamma", "accuracy"],
                "rows": trace_rows,
            },
        },
        generated_at=_now(),
    )


# === privacy-utility ===


def mean_jerk(frames: np.ndarray) -> float:
    """Mean third-difference magnitude over joints and frames (m / frame^3)."""
    if frames.shape[0] < 4:
        raise UsageError("mean_jerk: need >= 4 frames")
    third = frames[3:] - 3 * frames[2:-1] + 3 * frames[1:-2] - frames[:-3]
    return float(np.mean(np.linalg.norm(third, axis=2)))


def mean_displacement(a: np.ndarray, b: np.ndarray) -> float:
    """Mean joint-position distance between two aligned sequences."""
    if a.shape != b.shape:
        raise UsageError("mean_displacement: shape mismatch")
    return float(np.mean(np.linalg.norm(a - b, axis=2)))


def _variant_outputs(ctx: EvalContext, variant: str, mode: str, gamma: float):
    """Anonymized sequences for utility metrics (kept order)."""
    from .recognition import anonymize_sequences

    anon, fits, model = ctx.arm(variant, mode, gamma)
    seqs, kept = anonymize_sequences(ctx.corpus, anon, fits, model, ctx.skel)
    return seqs, kept


def privacy_utility_report(ctx: EvalContext, tuned: list) -> ExperimentReport:
    """Utility metrics at the tuned gammas: action accuracy, displacement
    against the variant's zero-noise output, and mean jerk. A second table
    compares jerk across noise modes at a matched gamma (the grid midpoint)."""
    rows = []
    for r in tuned:
        acc_act = ctx.attacker_accuracy(r.variant, r.mode, r.gamma_star, TASK_ACTION)
        base_seqs, base_kept = _variant_outputs(ctx, r.variant, r.mode, 0.0)
        anon_seqs, kept = _variant_outputs(ctx, r.variant, r.mode, r.gamma_star)
        assert kept == base_kept
        disp = float(np.mean([
            mean_displacement(a.frames, b.frames)
            for a, b in zip(anon_seqs, base_seqs)
        ]))
        jerk = float(np.mean([mean_jerk(s.frames) for s in anon_seqs]))
        rows.append([r.variant, r.mode, r.target, r.gamma_star, r.accuracy,
                     acc_act, disp, jerk])

    jerk_rows = []
    for variant in VARIANTS:
        grid = ctx.gamma_grids[variant]
        gamma = grid[len(grid) // 2]
        per_mode = {}
        for mode in (STATIC, VARIABLE):
            seqs, _ = _variant_outputs(ctx, variant, mode, gamma)
            per_mode[mode] = float(np.mean([mean_jerk(s.frames) for s in seqs]))
        jerk_rows.append([variant, gamma, per_mode[STATIC], per_mode[VARIABLE]])

    return ExperimentReport(
        experiment_id="privacy-utility",
        config=ctx.snapshot(),
        tables={
            "tradeoff": {
                "columns": ["variant", "mode", "target", "gamma_star",
                            "identity_balanced_accuracy", "action_balanced_accuracy",
                            "mean_displacement_m", "mean_jerk_m"],
                "rows": rows,
            },
            "jerk_by_mode": {
                "columns": ["variant", "gamma", "static_jerk_m", "variable_jerk_m"],
                "rows": jerk_rows,
            },
        },
        generated_at=_now(),
    )
