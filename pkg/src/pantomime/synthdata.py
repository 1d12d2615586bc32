"""Synthetic labeled motion corpora with known ground-truth body parameters.

Sequences are built from per-action base angle patterns (sinusoids of the gait
cycle phase plus, for sit-to-stand, a raised-cosine stand profile) overlaid
with an identity signature

    theta(t) = base(t) + amplitudes * sin(2 phi(t) + phases) + jitter,

where phi(t) = pi * cadence_eff * t + start_phase is the gait cycle phase (so
the signature oscillates at step frequency) and jitter is seeded N(0, 0.01^2)
per angle component. cadence_eff is the profile cadence times the action
multiplier times a per-repetition jitter factor (+-3% by default). Identity
lives in the amplitude/phase grids, the posture offsets, the shape vector,
cadence, and stride; action lives in the base pattern and its cadence and
stride multipliers. Walking speed is stride * stride_mult * cadence_eff, so
the root trajectory carries identity too, with rep-to-rep tempo variation.

Root height is solved numerically per frame so the lowest foot joint touches
the ground plane exactly; this makes the ground term of downstream fitting
consistent by construction and gives natural vertical bob.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, UsageError
from .kinematics import (
    FOOT_JOINTS,
    NUM_BODY_JOINTS,
    NUM_JOINTS,
    SHAPE_DIM,
    UNDERCOMPLETE_17_JOINTS,
    MotionSequence,
    ParamSequence,
    Skeleton,
    default_skeleton,
    forward_kinematics,
    overcomplete_layout,
)
from .numerics import SeededRng, child_seed

ACTIONS = ("walk-normal", "walk-fast", "walk-carry", "walk-crouch", "sit-to-stand")
WALKING_ACTIONS = ("walk-normal", "walk-fast", "walk-carry", "walk-crouch")

JITTER_SIGMA = 0.01
# cadence draw range (steps/s); the lower end keeps two full gait cycles in a
# 3 s recording even under the slowest action multiplier and -3% rep jitter
CADENCE_RANGE = (1.5, 2.1)
STRIDE_RANGE = (0.15, 0.70)
# per-repetition cadence multiplier range: real reps never repeat the exact
# tempo, so the exact frequency cannot act as a noise-free biometric
CADENCE_JITTER = 0.015
MIN_AMPLITUDE_GAP = 0.02  # identities must differ by this in >= 1 amplitude

# pose-row indices (joint index - 1)
L_HIP, R_HIP, SPINE1 = 0, 1, 2
L_KNEE, R_KNEE, SPINE2 = 3, 4, 5
L_ANKLE, R_ANKLE, SPINE3 = 6, 7, 8
L_FOOT, R_FOOT, NECK = 9, 10, 11
L_COLLAR, R_COLLAR, HEAD = 12, 13, 14
L_SHOULDER, R_SHOULDER = 15, 16
L_ELBOW, R_ELBOW = 17, 18
L_WRIST, R_WRIST = 19, 20

# identity amplitude caps (radians) per pose row and axis; zero rows are the
# unobservable leaf rotations plus the head, which carry no signature so the
# fitter can recover what the attacker will see
_AMP_CAPS = np.zeros((NUM_BODY_JOINTS, 3))
_AMP_CAPS[L_HIP] = _AMP_CAPS[R_HIP] = (0.10, 0.03, 0.04)
_AMP_CAPS[SPINE1] = _AMP_CAPS[SPINE2] = _AMP_CAPS[SPINE3] = (0.04, 0.02, 0.05)
_AMP_CAPS[L_KNEE] = _AMP_CAPS[R_KNEE] = (0.10, 0.01, 0.01)
_AMP_CAPS[L_ANKLE] = _AMP_CAPS[R_ANKLE] = (0.08, 0.02, 0.02)
_AMP_CAPS[NECK] = (0.03, 0.01, 0.03)
_AMP_CAPS[L_COLLAR] = _AMP_CAPS[R_COLLAR] = (0.02, 0.01, 0.02)
_AMP_CAPS[L_SHOULDER] = _AMP_CAPS[R_SHOULDER] = (0.10, 0.02, 0.04)
_AMP_CAPS[L_ELBOW] = _AMP_CAPS[R_ELBOW] = (0.08, 0.01, 0.02)

MAX_IDENTITY_AMPLITUDE = 1.2

# constant posture offsets (arm carriage, stance habits): per-identity, drawn
# uniform in +/- 2x the amplitude cap per row, hard-capped here
_POSTURE_SCALE = 2.0
MAX_POSTURE_OFFSET = 1.2

_WALK_STYLES = {
    # styles are told apart by dynamic signatures (amplitude patterns,
    # harmonic ratios, tempo), not just pose constants: constants are what a
    # constant-offset corruption destroys first
    "walk-normal": dict(
        cadence_mult=1.0, stride_mult=1.0,
        hip_amp=0.45, hip_const=0.0,
        knee_f1=0.12, knee_f2=0.22, knee_const=0.0,
        ankle_f1=0.10, ankle_f2=0.12, ankle_const=0.0,
        shoulder_amp=0.28, shoulder_const=0.0,
        elbow_amp=0.14, elbow_const=0.35,
        lean=0.0, sway_mult=1.0,
    ),
    # exact 1.25 cadence ratio to walk-normal is part of the generator contract
    "walk-fast": dict(
        cadence_mult=1.25, stride_mult=1.12,
        hip_amp=0.52, hip_const=0.0,
        knee_f1=0.14, knee_f2=0.26, knee_const=0.0,
        ankle_f1=0.11, ankle_f2=0.14, ankle_const=0.0,
        shoulder_amp=0.35, shoulder_const=0.0,
        elbow_amp=0.16, elbow_const=0.40,
        lean=0.04, sway_mult=1.15,
    ),
    # the load pins the arms (near-zero swing) and stiffens the trunk
    "walk-carry": dict(
        cadence_mult=1.06, stride_mult=0.90,
        hip_amp=0.43, hip_const=0.0,
        knee_f1=0.11, knee_f2=0.20, knee_const=0.0,
        ankle_f1=0.09, ankle_f2=0.11, ankle_const=0.0,
        shoulder_amp=0.04, shoulder_const=0.38,
        elbow_amp=0.02, elbow_const=1.05,
        lean=0.06, sway_mult=0.55,
    ),
    # crouch gait flexes once per step instead of twice (inverted knee
    # harmonic ratio) and waddles (exaggerated lateral sway)
    "walk-crouch": dict(
        cadence_mult=0.92, stride_mult=0.55,
        hip_amp=0.38, hip_const=0.55,
        knee_f1=0.30, knee_f2=0.05, knee_const=-0.90,
        ankle_f1=0.16, ankle_f2=0.04, ankle_const=0.35,
        shoulder_amp=0.15, shoulder_const=0.05,
        elbow_amp=0.10, elbow_const=0.55,
        lean=0.35, sway_mult=1.8,
    ),
}


@dataclass(frozen=True)
class IdentityProfile:
    """Gait signature of one synthetic subject."""

    subject_id: str
    shape: np.ndarray        # (16,)
    cadence: float           # steps per second
    stride_scale: float      # meters per step
    amplitudes: np.ndarray   # (21, 3) radians
    phases: np.ndarray       # (21, 3) in [0, 2 pi)
    posture: np.ndarray      # (21, 3) radians, constant idiosyncratic offset
    seed: int

    def __post_init__(self):
        if self.shape.shape != (SHAPE_DIM,):
            raise UsageError("IdentityProfile: shape must be (16,)")
        if self.amplitudes.shape != (NUM_BODY_JOINTS, 3):
            raise UsageError("IdentityProfile: amplitudes must be (21, 3)")
        if self.phases.shape != (NUM_BODY_JOINTS, 3):
            raise UsageError("IdentityProfile: phases must be (21, 3)")
        if self.posture.shape != (NUM_BODY_JOINTS, 3):
            raise UsageError("IdentityProfile: posture must be (21, 3)")
        if not (1.4 <= self.cadence <= 2.4):
            raise UsageError(f"IdentityProfile: cadence {self.cadence} out of range")
        if self.stride_scale <= 0.0:
            raise UsageError("IdentityProfile: stride_scale must be > 0")
        if np.any(self.amplitudes < 0.0) or np.any(
            self.amplitudes > MAX_IDENTITY_AMPLITUDE
        ):
            raise UsageError("IdentityProfile: amplitudes must lie in [0, 1.2]")
        if np.any(np.abs(self.posture) > MAX_POSTURE_OFFSET):
            raise UsageError(
                f"IdentityProfile: posture offsets must lie in [-{MAX_POSTURE_OFFSET}, {MAX_POSTURE_OFFSET}]"
            )


@dataclass(frozen=True)
class CorpusConfig:
    """Recipe for a labeled corpus."""

    name: str
    master_seed: int
    num_identities: int
    actions: tuple
    sequences_per_cell: int
    duration: float          # seconds (pre-trim)
    fps: float
    jitter_sigma: float = JITTER_SIGMA
    trim_cycles: int = 0     # 0 = keep full duration, 1 = trim to one gait cycle
    cadence_jitter: float = CADENCE_JITTER

    def __post_init__(self):
        if self.num_identities < 2:
            raise UsageError("CorpusConfig: need at least 2 identities")
        if self.sequences_per_cell < 1:
            raise UsageError("CorpusConfig: sequences_per_cell must be >= 1")
        for act in self.actions:
            if act not in ACTIONS:
                raise UsageError(f"CorpusConfig: unknown action '{act}'")
        if self.duration <= 0 or self.fps <= 0:
            raise UsageError("CorpusConfig: duration and fps must be > 0")

    @property
    def num_sequences(self) -> int:
        return self.num_identities * len(self.actions) * self.sequences_per_cell


@dataclass
class Corpus:
    """Generated sequences plus every label and ground-truth parameter."""

    config: CorpusConfig
    skeleton: Skeleton
    profiles: list
    sequences: list          # list[MotionSequence]
    params: list             # list[ParamSequence] ground truth
    seq_ids: list            # list[str]
    subject_ids: list        # list[str] per sequence
    action_labels: list      # list[str] per sequence
    noise_seeds: list        # list[int] per sequence

    def pose_tracks(self) -> list:
        """Ground-truth pose angles per sequence as (T, 63) arrays."""
        return [p.pose.reshape(p.num_frames, -1).copy() for p in self.params]

    def content_hash(self) -> str:
        h = hashlib.sha256()
        for sid, seq in zip(self.seq_ids, self.sequences):
            h.update(sid.encode("utf-8"))
            h.update(np.ascontiguousarray(seq.frames).tobytes())
        return h.hexdigest()


def action_cadence(profile: IdentityProfile, action: str) -> float:
    """Effective steps/s for an action (profile cadence times action multiplier)."""
    if action == "sit-to-stand":
        return profile.cadence
    return profile.cadence * _WALK_STYLES[action]["cadence_mult"]


def generate_identity(master_seed: int, index: int, attempt: int = 0) -> IdentityProfile:
    """Draw one identity. Draw order (fixed contract): 16 shape normals, one
    cadence uniform, one stride uniform, 63 amplitude uniforms, 63 phase
    uniforms, 63 posture uniforms. `attempt` reseeds deterministically when
    the distinctness check in generate_identities rejects a draw."""
    rng = SeededRng(child_seed(child_seed(master_seed, 1000 + index), attempt))
    shape = np.clip(rng.normal(SHAPE_DIM, std=0.8), -2.0, 2.0)
    cadence = CADENCE_RANGE[0] + (CADENCE_RANGE[1] - CADENCE_RANGE[0]) * rng.uniform(1)[0]
    stride = STRIDE_RANGE[0] + (STRIDE_RANGE[1] - STRIDE_RANGE[0]) * rng.uniform(1)[0]
    # floor at 1/4 of the cap so every identity carries a usable pose signature
    amp_u = rng.uniform(NUM_BODY_JOINTS * 3).reshape(NUM_BODY_JOINTS, 3)
    amps = _AMP_CAPS * (0.25 + 0.75 * amp_u)
    phases = 2.0 * np.pi * rng.uniform(NUM_BODY_JOINTS * 3).reshape(NUM_BODY_JOINTS, 3)
    posture_u = rng.uniform(NUM_BODY_JOINTS * 3).reshape(NUM_BODY_JOINTS, 3)
    posture = _POSTURE_SCALE * _AMP_CAPS * (2.0 * posture_u - 1.0)
    return IdentityProfile(
        subject_id=f"id{index:02d}",
        shape=shape,
        cadence=float(cadence),
        stride_scale=float(stride),
        amplitudes=amps,
        phases=phases,
        posture=posture,
        seed=child_seed(master_seed, 1000 + index),
    )


def generate_identities(master_seed: int, count: int) -> list:
    """Draw `count` identities enforcing pairwise distinctness: every pair must
    differ by >= 0.02 rad in at least one amplitude entry. Collisions bump the
    later identity's attempt counter (deterministic)."""
    profiles = []
    for i in range(count):
        attempt = 0
        while True:
            cand = generate_identity(master_seed, i, attempt)
            clash = any(
                float(np.max(np.abs(cand.amplitudes - p.amplitudes))) < MIN_AMPLITUDE_GAP
                for p in profiles
            )
            if not clash:
                profiles.append(cand)
                break
            attempt += 1
            if attempt > 100:
                raise DataError(
                    f"generate_identities: could not separate identity {i} "
                    f"after 100 attempts"
                )
    return profiles


def _walk_base(phi: np.ndarray, style: dict) -> np.ndarray:
    """Base walking pose track (T, 21, 3) as a function of cycle phase."""
    t = phi.shape[0]
    pose = np.zeros((t, NUM_BODY_JOINTS, 3))
    s = np.sin
    half = lambda x: 0.5 * (1.0 - np.cos(x))

    pose[:, L_HIP, 0] = style["hip_const"] + style["hip_amp"] * s(phi)
    pose[:, R_HIP, 0] = style["hip_const"] + style["hip_amp"] * s(phi + np.pi)
    # knees flex twice per cycle (stance + swing), so the double-frequency
    # term dominates; flexion is negative about x
    pose[:, L_KNEE, 0] = style["knee_const"] - (
        style["knee_f1"] * half(phi - 0.6) + style["knee_f2"] * half(2.0 * phi + 0.3)
    )
    pose[:, R_KNEE, 0] = style["knee_const"] - (
        style["knee_f1"] * half(phi + np.pi - 0.6)
        + style["knee_f2"] * half(2.0 * phi + 0.3)
    )
    pose[:, L_ANKLE, 0] = style["ankle_const"] + style["ankle_f1"] * s(phi + 1.2) + \
        style["ankle_f2"] * s(2.0 * phi + 2.0)
    pose[:, R_ANKLE, 0] = style["ankle_const"] + style["ankle_f1"] * s(phi + np.pi + 1.2) + \
        style["ankle_f2"] * s(2.0 * phi + 2.0)

    sway = style["sway_mult"]
    pose[:, SPINE1, 2] = sway * 0.05 * s(phi)
    pose[:, SPINE2, 2] = sway * 0.04 * s(phi)
    pose[:, SPINE3, 2] = sway * 0.03 * s(phi)
    pose[:, SPINE1, 0] = style["lean"] * 0.7 + 0.02 * s(2.0 * phi)
    pose[:, SPINE2, 0] = style["lean"] * 0.3
    pose[:, NECK, 2] = sway * -0.04 * s(phi)

    pose[:, L_SHOULDER, 0] = style["shoulder_const"] + style["shoulder_amp"] * s(phi + np.pi)
    pose[:, R_SHOULDER, 0] = style["shoulder_const"] + style["shoulder_amp"] * s(phi)
    pose[:, L_ELBOW, 0] = style["elbow_const"] + style["elbow_amp"] * s(phi + np.pi - 0.4)
    pose[:, R_ELBOW, 0] = style["elbow_const"] + style["elbow_amp"] * s(phi - 0.4)
    return pose


def _sit_stand_base(times: np.ndarray, duration: float) -> np.ndarray:
    """Sit-to-stand-to-sit pose track: seated at both ends, standing mid-way."""
    t = times.shape[0]
    pose = np.zeros((t, NUM_BODY_JOINTS, 3))
    stand = 0.5 * (1.0 - np.cos(2.0 * np.pi * times / duration))  # 0 seated, 1 standing
    seated = 1.0 - stand
    lean = np.sin(np.pi * stand)  # trunk pitches forward during the transfer
    pose[:, L_HIP, 0] = 1.25 * seated
    pose[:, R_HIP, 0] = 1.25 * seated
    pose[:, L_KNEE, 0] = -1.35 * seated
    pose[:, R_KNEE, 0] = -1.35 * seated
    pose[:, L_ANKLE, 0] = 0.12 * seated
    pose[:, R_ANKLE, 0] = 0.12 * seated
    pose[:, SPINE1, 0] = 0.22 * lean + 0.05 * seated
    pose[:, SPINE2, 0] = 0.10 * lean
    pose[:, L_SHOULDER, 0] = 0.08 * lean + 0.05
    pose[:, R_SHOULDER, 0] = 0.08 * lean + 0.05
    pose[:, L_ELBOW, 0] = 0.25
    pose[:, R_ELBOW, 0] = 0.25
    return pose


def generate_sequence(
    profile: IdentityProfile,
    action: str,
    duration: float,
    fps: float,
    noise_seed: int,
    jitter_sigma: float = JITTER_SIGMA,
    skel: Skeleton | None = None,
    trim_cycles: int = 0,
    cadence_jitter: float = CADENCE_JITTER,
):
    """Generate one labeled sequence; returns (MotionSequence, ParamSequence).

    Walking actions require duration >= 2 gait cycles. Seeded draws, in order:
    one uniform for the start phase, one uniform for the rep's cadence
    multiplier (both always consumed, both ignored for sit-to-stand), then
    T*63 jitter normals. trim_cycles=1 cuts the stored output to exactly one
    gait cycle after generation.
    """
    if action not in ACTIONS:
        raise UsageError(f"generate_sequence: unknown action '{action}'")
    if duration <= 0 or fps <= 0:
        raise UsageError("generate_sequence: duration and fps must be > 0")
    if not (0.0 <= cadence_jitter < 0.5):
        raise UsageError("generate_sequence: cadence_jitter must be in [0, 0.5)")
    skel = skel or default_skeleton()

    rng = SeededRng(noise_seed)
    start_u = rng.uniform(1)[0]
    cadence_u = rng.uniform(1)[0]
    start_phase = 2.0 * np.pi * start_u if action in WALKING_ACTIONS else 0.0

    cadence = action_cadence(profile, action)
    if action in WALKING_ACTIONS:
        cadence = cadence * (1.0 + cadence_jitter * (2.0 * cadence_u - 1.0))
    cycle_freq = cadence / 2.0
    if action in WALKING_ACTIONS and duration * cycle_freq < 2.0 - 1e-9:
        raise UsageError(
            f"generate_sequence: walking needs >= 2 gait cycles, got "
            f"{duration * cycle_freq:.2f} (duration {duration}s, cadence {cadence:.2f})"
        )

    t_count = max(2, int(round(duration * fps)))
    times = np.arange(t_count) / fps
    phi = np.pi * cadence * times + start_phase  # cycle phase; step phase = 2 phi

    if action == "sit-to-stand":
        pose = _sit_stand_base(times, duration)
        style = None
    else:
        style = _WALK_STYLES[action]
        pose = _walk_base(phi, style)

    # identity signature: constant posture habit plus a step-frequency
    # modulation phase-locked to the gait
    pose = pose + profile.posture[None] + profile.amplitudes[None] * np.sin(
        2.0 * phi[:, None, None] + profile.phases[None]
    )
    if jitter_sigma > 0.0:
        pose = pose + rng.normal(t_count * NUM_BODY_JOINTS * 3, std=jitter_sigma).reshape(
            t_count, NUM_BODY_JOINTS, 3
        )

    root = np.zeros((t_count, 3))
    orient = np.zeros((t_count, 3))
    if action in WALKING_ACTIONS:
        speed = profile.stride_scale * style["stride_mult"] * cadence
        root[:, 1] = speed * times
        root[:, 0] = 0.018 * np.sin(phi)
        orient[:, 2] = 0.06 * np.sin(phi)
        orient[:, 1] = 0.03 * np.sin(phi + 0.5)
        orient[:, 0] = 0.3 * style["lean"] + 0.015 * np.sin(2.0 * phi)
    params = ParamSequence(
        root=root, root_orient=orient, pose=pose, shape=profile.shape.copy()
    )

    # solve root height so the lowest foot joint touches z = 0 every frame
    pos = forward_kinematics(skel, params)
    foot_min = pos[:, list(FOOT_JOINTS), 2].min(axis=1)
    params.root[:, 2] = -foot_min
    pos = pos.copy()
    pos[:, :, 2] -= foot_min[:, None]

    if trim_cycles:
        keep = max(2, int(round(fps * trim_cycles * 2.0 / cadence)))
        keep = min(keep, t_count)
        pos = pos[:keep]
        params = ParamSequence(
            root=params.root[:keep].copy(),
            root_orient=params.root_orient[:keep].copy(),
            pose=params.pose[:keep].copy(),
            shape=params.shape.copy(),
        )

    seq = MotionSequence(
        frames=pos, fps=fps, subject_id=profile.subject_id, action=action
    )
    return seq, params


def generate_corpus(config: CorpusConfig, skel: Skeleton | None = None) -> Corpus:
    """Generate the full labeled corpus in a fixed identity/action/repetition
    order. Per-sequence noise seeds derive from the master seed and the linear
    sequence index (namespace 50000+)."""
    skel = skel or default_skeleton()
    profiles = generate_identities(config.master_seed, config.num_identities)
    sequences, params, seq_ids, subjects, actions_out, seeds = [], [], [], [], [], []
    linear = 0
    for profile in profiles:
        for action in config.actions:
            for rep in range(config.sequences_per_cell):
                noise_seed = child_seed(config.master_seed, 50000 + linear)
                seq, par = generate_sequence(
                    profile,
                    action,
                    config.duration,
                    config.fps,
                    noise_seed,
                    jitter_sigma=config.jitter_sigma,
                    skel=skel,
                    trim_cycles=config.trim_cycles,
                    cadence_jitter=config.cadence_jitter,
                )
                sequences.append(seq)
                params.append(par)
                seq_ids.append(f"{profile.subject_id}_{action}_{rep:02d}")
                subjects.append(profile.subject_id)
                actions_out.append(action)
                seeds.append(noise_seed)
                linear += 1
    return Corpus(
        config=config,
        skeleton=skel,
        profiles=profiles,
        sequences=sequences,
        params=params,
        seq_ids=seq_ids,
        subject_ids=subjects,
        action_labels=actions_out,
        noise_seeds=seeds,
    )


# === observation remappings ===


def remap_to_17(seq: MotionSequence) -> MotionSequence:
    """Undercomplete 17-point view: drop spine1/spine2/collars/head."""
    if seq.num_points != NUM_JOINTS:
        raise UsageError("remap_to_17: input must have 22 points")
    return MotionSequence(
        frames=seq.frames[:, list(UNDERCOMPLETE_17_JOINTS), :].copy(),
        fps=seq.fps,
        subject_id=seq.subject_id,
        action=seq.action,
    )


def remap_to_54(seq: MotionSequence) -> MotionSequence:
    """Overcomplete 54-marker view: 3-marker clusters (joint, +d, -d) on 16
    joints, single markers elsewhere. Cluster means equal the joint position."""
    if seq.num_points != NUM_JOINTS:
        raise UsageError("remap_to_54: input must have 22 points")
    layout = overcomplete_layout()
    frames = np.empty((seq.num_frames, len(layout), 3))
    for m, (j, off) in enumerate(layout):
        frames[:, m, :] = seq.frames[:, j, :] + off[None, :]
    return MotionSequence(
        frames=frames, fps=seq.fps, subject_id=seq.subject_id, action=seq.action
    )


# === preset corpora ===


def desk_ceti_config(master_seed: int) -> CorpusConfig:
    """20 identities x 5 actions x 6 repetitions, 3 s at 30 fps."""
    return CorpusConfig(
        name="desk-ceti",
        master_seed=master_seed,
        num_identities=20,
        actions=ACTIONS,
        sequences_per_cell=6,
        duration=3.0,
        fps=30.0,
    )


def desk_horst_config(master_seed: int) -> CorpusConfig:
    """20 identities x 1 action x 10 repetitions, trimmed to one gait cycle."""
    return CorpusConfig(
        name="desk-horst",
        master_seed=master_seed,
        num_identities=20,
        actions=("walk-normal",),
        sequences_per_cell=10,
        duration=3.0,
        fps=30.0,
        trim_cycles=1,
    )
