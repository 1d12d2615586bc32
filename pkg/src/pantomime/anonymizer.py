"""Latent-space motion anonymization.

The pipeline: fit a sequence to body parameters, encode the pose track into
a prior's latent space, perturb with scaled standard normal noise,

    a_t = gamma * p   + z_t   (static: one p for the whole sequence)
    a_t = gamma * p_t + z_t   (variable: fresh p_t per frame)

decode back to a pose track, zero the identity-bearing components (shape
beta, root translation r, root orientation Phi), run forward kinematics, and
re-estimate the root translation as the decoded right-foot trajectory
anchored at the origin. Root orientation stays zero: no re-estimation rule
exists for it, so anonymized output never recovers heading.

Everything downstream of the fit is a pure function of the pose track Theta
and the config, which is the privacy argument: two fits that differ only in
(beta, r, Phi) anonymize to bit-identical outputs.

direct_noise_baseline is the comparison arm: the same noise schedule applied
straight to positions (meters) or to the fitted joint angles (radians). The
angle variant runs through the same zeroing + re-rooting tail so it differs
from the latent path only in where the noise enters.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigurationError, UsageError
from .fitting import FitOptions, FitResult, FitWeights, JointMapping, fit_sequence
from .kinematics import (
    RIGHT_FOOT_INDEX,
    MotionSequence,
    ParamSequence,
    Skeleton,
    forward_kinematics,
)
from .numerics import SeededRng, child_seed, seed_from_string
from .priors import (
    POSE_VAE,
    PRIOR_KINDS,
    TRANSITION_CVAE,
    decode_poses,
    decode_transitions,
    encode_poses,
    encode_transitions,
    model_hash,
)

STATIC = "static"
VARIABLE = "variable"
NOISE_MODES = (STATIC, VARIABLE)

TARGET_POSITIONS = "positions"
TARGET_ANGLES = "joint-angles"


@dataclass(frozen=True)
class ComponentMask:
    """Which identity channels zero_components clears."""

    root: bool = True
    orient: bool = True
    shape: bool = True

    def to_dict(self) -> dict:
        return {"root": self.root, "orient": self.orient, "shape": self.shape}

    @classmethod
    def from_dict(cls, d: dict) -> "ComponentMask":
        return cls(
            root=bool(d.get("root", True)),
            orient=bool(d.get("orient", True)),
            shape=bool(d.get("shape", True)),
        )


@dataclass(frozen=True)
class AnonymizationConfig:
    prior: str = POSE_VAE
    mode: str = STATIC
    gamma: float = 1.0
    seed: int = 0
    mask: ComponentMask = field(default_factory=ComponentMask)

    def __post_init__(self):
        if self.prior not in PRIOR_KINDS:
            raise UsageError(f"AnonymizationConfig: unknown prior '{self.prior}'")
        if self.mode not in NOISE_MODES:
            raise UsageError(f"AnonymizationConfig: unknown mode '{self.mode}'")
        if not np.isfinite(self.gamma) or self.gamma < 0:
            raise UsageError(f"AnonymizationConfig: gamma must be >= 0, got {self.gamma}")

    def to_dict(self) -> dict:
        return {
            "prior": self.prior,
            "mode": self.mode,
            "gamma": float(self.gamma),
            "seed": int(self.seed),
            "mask": self.mask.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AnonymizationConfig":
        return cls(
            prior=d.get("prior", POSE_VAE),
            mode=d.get("mode", STATIC),
            gamma=float(d.get("gamma", 1.0)),
            seed=int(d.get("seed", 0)),
            mask=ComponentMask.from_dict(d.get("mask", {})),
        )


@dataclass
class AnonymizedSequence:
    output: MotionSequence
    seq_id: str
    config: AnonymizationConfig
    model_hash: str
    latent_distance: np.ndarray  # (T,) per-frame ||a_t - z_t||


@dataclass(frozen=True)
class DirectNoiseSpec:
    """Comparison-arm config: noise applied directly to positions or angles."""

    target: str = TARGET_POSITIONS
    mode: str = STATIC
    gamma: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.target not in (TARGET_POSITIONS, TARGET_ANGLES):
            raise UsageError(f"DirectNoiseSpec: unknown target '{self.target}'")
        if self.mode not in NOISE_MODES:
            raise UsageError(f"DirectNoiseSpec: unknown mode '{self.mode}'")
        if not np.isfinite(self.gamma) or self.gamma < 0:
            raise UsageError(f"DirectNoiseSpec: gamma must be >= 0, got {self.gamma}")

    def to_dict(self) -> dict:
        return {
            "target": self.target,
            "mode": self.mode,
            "gamma": float(self.gamma),
            "seed": int(self.seed),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DirectNoiseSpec":
        return cls(
            target=d.get("target", TARGET_POSITIONS),
            mode=d.get("mode", STATIC),
            gamma=float(d.get("gamma", 1.0)),
            seed=int(d.get("seed", 0)),
        )


def sequence_seed(base_seed: int, seq_id: str) -> int:
    """Per-sequence noise seed derived from the config seed and the id.

    An attacker who knows the mechanism and base seed can reproduce the
    schedule only with the id; test-set noise realizations are never reused
    across sequences.
    """
    return child_seed(base_seed, seed_from_string(seq_id))


def anonymize_latents(z: np.ndarray, mode: str, gamma: float, seed: int) -> np.ndarray:
    """Add gamma-scaled standard normal noise to a latent track (T, d)."""
    if mode not in NOISE_MODES:
        raise UsageError(f"anonymize_latents: unknown mode '{mode}'")
    if not np.isfinite(gamma) or gamma < 0:
        raise UsageError(f"anonymize_latents: gamma must be >= 0, got {gamma}")
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 2:
        raise UsageError(f"anonymize_latents: expected (T, d) latents, got {z.shape}")
    t, d = z.shape
    rng = SeededRng(seed)
    if mode == STATIC:
        p = rng.normal(d)[None, :]
    else:
        p = rng.normal(t * d).reshape(t, d)
    return z + gamma * p


def zero_components(params: ParamSequence, mask: ComponentMask = ComponentMask()) -> ParamSequence:
    """Replace masked identity channels with zeros; the pose track is untouched."""
    t = params.num_frames
    return ParamSequence(
        root=np.zeros((t, 3)) if mask.root else params.root.copy(),
        root_orient=np.zeros((t, 3)) if mask.orient else params.root_orient.copy(),
        pose=params.pose.copy(),
        shape=np.zeros(params.shape.shape) if mask.shape else params.shape.copy(),
    )


def _encode(model, theta: np.ndarray) -> np.ndarray:
    if model.kind == POSE_VAE:
        return encode_poses(model, theta, mode="mean")[2]
    return encode_transitions(model, theta, mode="mean")[2]


def _decode(model, a: np.ndarray) -> np.ndarray:
    if model.kind == POSE_VAE:
        return decode_poses(model, a)
    return decode_transitions(model, a)


def pantomime(
    source,
    config: AnonymizationConfig,
    model,
    skel: Skeleton,
    *,
    seq_id: str = "",
    mapping: JointMapping | None = None,
    weights: FitWeights | None = None,
    options: FitOptions | None = None,
    fit_seed: int = 0,
) -> AnonymizedSequence:
    """Run the full anonymization pipeline on one sequence.

    source is either a FitResult (preferred: fits are cached upstream) or a
    raw MotionSequence, in which case a fit runs first and mapping must be
    given. The noise seed is config.seed when seq_id is empty, otherwise
    derived per sequence via sequence_seed.
    """
    if model is None:
        raise ConfigurationError("pantomime: a trained prior model is required")
    if model.kind != config.prior:
        raise ConfigurationError(
            f"pantomime: config wants prior '{config.prior}' but model is '{model.kind}'"
        )
    if isinstance(source, FitResult):
        fit = source
    elif isinstance(source, MotionSequence):
        if mapping is None:
            raise UsageError("pantomime: fitting a raw sequence requires a mapping")
        fit = fit_sequence(
            source,
            mapping,
            weights or FitWeights(),
            model,
            skel,
            options or FitOptions(),
            seed=fit_seed,
        )
        if fit.failed:
            raise ConfigurationError(
                f"pantomime: fit failed ({fit.failure_reason}); sequence excluded"
            )
    else:
        raise UsageError(f"pantomime: unsupported source type {type(source).__name__}")

    params = fit.params
    t = params.num_frames
    theta = params.pose.reshape(t, -1)

    z = _encode(model, theta)
    noise_seed = config.seed if not seq_id else sequence_seed(config.seed, seq_id)
    a = anonymize_latents(z, config.mode, config.gamma, noise_seed)
    theta_hat = _decode(model, a)

    anon_params = zero_components(
        replace(params, pose=theta_hat.reshape(t, -1, 3)), config.mask
    )
    pos = forward_kinematics(skel, anon_params)
    rf = pos[:, RIGHT_FOOT_INDEX, :]
    pos = pos + (rf - rf[0])[:, None, :]

    fps = source.fps if isinstance(source, MotionSequence) else fit.fps
    if fps <= 0:
        raise UsageError("pantomime: fit result carries no fps; refit or pass a MotionSequence")
    out = MotionSequence(frames=pos, fps=fps, subject_id="anonymized", action="")
    return AnonymizedSequence(
        output=out,
        seq_id=seq_id,
        config=config,
        model_hash=model_hash(model),
        latent_distance=np.linalg.norm(a - z, axis=1),
    )


def direct_noise_baseline(
    target: str,
    source,
    mode: str,
    gamma: float,
    seed: int,
    *,
    skel: Skeleton | None = None,
    fps: float | None = None,
    mask: ComponentMask = ComponentMask(),
) -> MotionSequence:
    """Noise applied to the raw representation instead of the latent space.

    target 'positions': source is a MotionSequence; every coordinate gets
    gamma-scaled normal noise (static reuses one per-point offset).

    target 'joint-angles': source is a ParamSequence or FitResult; the 63
    body-joint angle components get the noise, then the sequence runs through
    the same zeroing + FK + right-foot re-rooting tail as the latent path.
    """
    if mode not in NOISE_MODES:
        raise UsageError(f"direct_noise_baseline: unknown mode '{mode}'")
    if not np.isfinite(gamma) or gamma < 0:
        raise UsageError(f"direct_noise_baseline: gamma must be >= 0, got {gamma}")
    rng = SeededRng(seed)

    if target == TARGET_POSITIONS:
        if not isinstance(source, MotionSequence):
            raise UsageError("direct_noise_baseline: positions target needs a MotionSequence")
        t, p, _ = source.frames.shape
        if mode == STATIC:
            noise = rng.normal(p * 3).reshape(1, p, 3)
        else:
            noise = rng.normal(t * p * 3).reshape(t, p, 3)
        return MotionSequence(
            frames=source.frames + gamma * noise,
            fps=source.fps,
            subject_id=source.subject_id,
            action=source.action,
        )

    if target == TARGET_ANGLES:
        if isinstance(source, FitResult):
            params = source.params
            fps_val = fps if fps is not None else source.fps
        elif isinstance(source, ParamSequence):
            params = source
            fps_val = fps if fps is not None else 0.0
        else:
            raise UsageError(
                "direct_noise_baseline: joint-angles target needs a ParamSequence or FitResult"
            )
        if skel is None:
            raise UsageError("direct_noise_baseline: joint-angles target needs a skeleton")
        if fps_val <= 0:
            raise UsageError("direct_noise_baseline: joint-angles target needs fps > 0")
        t = params.num_frames
        flat = params.pose.reshape(t, -1)
        d = flat.shape[1]
        if mode == STATIC:
            noise = rng.normal(d)[None, :]
        else:
            noise = rng.normal(t * d).reshape(t, d)
        noised = replace(params, pose=(flat + gamma * noise).reshape(t, -1, 3))
        anon = zero_components(noised, mask)
        pos = forward_kinematics(skel, anon)
        rf = pos[:, RIGHT_FOOT_INDEX, :]
        pos = pos + (rf - rf[0])[:, None, :]
        return MotionSequence(frames=pos, fps=fps_val, subject_id="anonymized", action="")

    raise UsageError(f"direct_noise_baseline: unknown target '{target}'")
