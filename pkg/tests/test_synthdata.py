"""Generator contract tests: cycle closure, cadence ratios, grounding, seeding,
corpus bookkeeping."""

import numpy as np
import pytest

from pantomime.errors import UsageError
from pantomime.kinematics import (
    FOOT_JOINTS,
    NUM_BODY_JOINTS,
    SHAPE_DIM,
    default_skeleton,
    forward_kinematics,
)
from pantomime.numerics import child_seed
from pantomime.synthdata import (
    ACTIONS,
    CADENCE_RANGE,
    L_KNEE,
    STRIDE_RANGE,
    CorpusConfig,
    IdentityProfile,
    action_cadence,
    desk_ceti_config,
    desk_horst_config,
    generate_corpus,
    generate_identities,
    generate_identity,
    generate_sequence,
    remap_to_17,
    remap_to_54,
)


def manual_profile(cadence=2.0, stride=0.4):
    """Profile with exact cadence and mild deterministic signature arrays."""
    phases = np.linspace(0.0, 2.0 * np.pi, NUM_BODY_JOINTS * 3, endpoint=False)
    return IdentityProfile(
        subject_id="id99",
        shape=np.zeros(SHAPE_DIM),
        cadence=cadence,
        stride_scale=stride,
        amplitudes=np.full((NUM_BODY_JOINTS, 3), 0.02),
        phases=phases.reshape(NUM_BODY_JOINTS, 3),
        posture=np.zeros((NUM_BODY_JOINTS, 3)),
        seed=1,
    )


# === single-sequence geometry ===


def test_gait_cycle_closes():
    # cadence 2.0 steps/s at 30 fps puts one full gait cycle at exactly 30
    # frames; with jitter off, frame 60 must repeat frame 0 up to the root
    # translation that accumulated over two cycles
    prof = manual_profile(cadence=2.0)
    seq, _ = generate_sequence(
        prof, "walk-normal", duration=61.0 / 30.0, fps=30.0, noise_seed=9,
        jitter_sigma=0.0, cadence_jitter=0.0,
    )
    assert seq.num_frames == 61
    rel = seq.frames - seq.frames[:, 0:1, :]
    assert np.max(np.abs(rel[60] - rel[0])) < 1e-9


def test_walk_fast_cadence_ratio_is_exact():
    prof = manual_profile()
    assert action_cadence(prof, "walk-fast") == pytest.approx(
        1.25 * action_cadence(prof, "walk-normal"), abs=1e-15
    )


def test_knee_track_oscillates_at_the_cadence_ratio():
    # the dominant knee harmonic must actually move 1.25x faster for
    # walk-fast, not just claim to via the config
    prof = manual_profile(cadence=2.0)
    dom = {}
    for action in ("walk-normal", "walk-fast"):
        _, params = generate_sequence(
            prof, action, duration=16.0, fps=30.0, noise_seed=5,
            jitter_sigma=0.0, cadence_jitter=0.0,
        )
        knee = params.pose[:, L_KNEE, 0]
        spec = np.abs(np.fft.rfft(knee - knee.mean()))
        dom[action] = float(np.argmax(spec))
    ratio = dom["walk-fast"] / dom["walk-normal"]
    assert abs(ratio - 1.25) < 0.03


def test_feet_touch_ground_every_frame():
    prof = manual_profile()
    seq, _ = generate_sequence(
        prof, "walk-crouch", duration=2.5, fps=30.0, noise_seed=3
    )
    foot_z = seq.frames[:, list(FOOT_JOINTS), 2]
    lowest = foot_z.min(axis=1)
    assert np.max(np.abs(lowest)) < 1e-12
    # nothing pierces the floor either
    assert seq.frames[:, :, 2].min() > -1e-12


def test_frames_match_ground_truth_params():
    skel = default_skeleton()
    prof = manual_profile()
    seq, params = generate_sequence(
        prof, "walk-normal", duration=2.0, fps=30.0, noise_seed=4, skel=skel
    )
    pos = forward_kinematics(skel, params)
    assert np.max(np.abs(pos - seq.frames)) < 1e-12


def test_jitter_does_not_shift_locomotion_draws():
    # start-phase and cadence uniforms are drawn before the jitter normals,
    # so turning jitter on must not change the root track or orientation
    prof = manual_profile()
    _, clean = generate_sequence(
        prof, "walk-normal", duration=2.0, fps=30.0, noise_seed=12,
        jitter_sigma=0.0,
    )
    _, noisy = generate_sequence(
        prof, "walk-normal", duration=2.0, fps=30.0, noise_seed=12,
        jitter_sigma=0.05,
    )
    assert np.array_equal(clean.root[:, 1], noisy.root[:, 1])
    assert np.array_equal(clean.root_orient, noisy.root_orient)
    assert not np.array_equal(clean.pose, noisy.pose)


def test_sit_to_stand_ignores_locomotion_draws():
    prof = manual_profile()
    a, pa = generate_sequence(
        prof, "sit-to-stand", duration=2.0, fps=30.0, noise_seed=1,
        jitter_sigma=0.0,
    )
    b, _ = generate_sequence(
        prof, "sit-to-stand", duration=2.0, fps=30.0, noise_seed=2,
        jitter_sigma=0.0,
    )
    assert np.array_equal(a.frames, b.frames)
    assert np.all(pa.root[:, :2] == 0.0)
    assert np.all(pa.root_orient == 0.0)


def test_same_seed_reproduces_sequence():
    prof = manual_profile()
    a, _ = generate_sequence(prof, "walk-normal", duration=2.5, fps=30.0, noise_seed=77)
    b, _ = generate_sequence(prof, "walk-normal", duration=2.5, fps=30.0, noise_seed=77)
    assert np.array_equal(a.frames, b.frames)
    c, _ = generate_sequence(prof, "walk-normal", duration=2.5, fps=30.0, noise_seed=78)
    assert not np.array_equal(a.frames, c.frames)


def test_walking_requires_two_cycles():
    prof = manual_profile(cadence=2.0)
    with pytest.raises(UsageError):
        generate_sequence(
            prof, "walk-normal", duration=1.5, fps=30.0, noise_seed=1,
            cadence_jitter=0.0,
        )


def test_trim_to_one_cycle():
    prof = manual_profile(cadence=2.0)
    seq, params = generate_sequence(
        prof, "walk-normal", duration=3.0, fps=30.0, noise_seed=6,
        cadence_jitter=0.0, trim_cycles=1,
    )
    assert seq.num_frames == 30
    assert params.num_frames == 30


def test_unknown_action_rejected():
    with pytest.raises(UsageError):
        generate_sequence(manual_profile(), "cartwheel", 2.0, 30.0, 1)


# === identities ===


def test_generate_identity_deterministic_and_in_range():
    a = generate_identity(33, 4)
    b = generate_identity(33, 4)
    assert a.subject_id == "id04"
    assert np.array_equal(a.shape, b.shape)
    assert np.array_equal(a.amplitudes, b.amplitudes)
    assert a.cadence == b.cadence and a.stride_scale == b.stride_scale
    assert CADENCE_RANGE[0] <= a.cadence <= CADENCE_RANGE[1]
    assert STRIDE_RANGE[0] <= a.stride_scale <= STRIDE_RANGE[1]
    c = generate_identity(33, 5)
    assert not np.array_equal(a.amplitudes, c.amplitudes)


def test_generate_identities_enforces_amplitude_gap():
    profiles = generate_identities(33, 6)
    assert len(profiles) == 6
    for i in range(6):
        for j in range(i + 1, 6):
            gap = np.max(np.abs(profiles[i].amplitudes - profiles[j].amplitudes))
            assert gap >= 0.02


def test_identity_profile_validation():
    prof = manual_profile()
    with pytest.raises(UsageError):
        IdentityProfile(
            subject_id="x", shape=prof.shape, cadence=3.0,
            stride_scale=prof.stride_scale, amplitudes=prof.amplitudes,
            phases=prof.phases, posture=prof.posture, seed=0,
        )
    with pytest.raises(UsageError):
        IdentityProfile(
            subject_id="x", shape=prof.shape, cadence=prof.cadence,
            stride_scale=prof.stride_scale,
            amplitudes=np.full((NUM_BODY_JOINTS, 3), 1.5),
            phases=prof.phases, posture=prof.posture, seed=0,
        )


# === corpora ===


def tiny_config(seed, ids=2, reps=1, actions=("walk-normal",)):
    return CorpusConfig(
        name="tiny", master_seed=seed, num_identities=ids, actions=actions,
        sequences_per_cell=reps, duration=3.0, fps=30.0,
    )


def test_corpus_counts_and_labels(small_corpus):
    cfg = small_corpus.config
    n = cfg.num_identities * len(cfg.actions) * cfg.sequences_per_cell
    assert cfg.num_sequences == n
    assert len(small_corpus.sequences) == n
    assert len(small_corpus.params) == n
    assert len(small_corpus.seq_ids) == n
    for i, sid in enumerate(small_corpus.seq_ids):
        subject, action, rep = sid.rsplit("_", 2)
        assert small_corpus.subject_ids[i] == subject
        assert small_corpus.action_labels[i] == action
        assert small_corpus.sequences[i].subject_id == subject
        assert small_corpus.sequences[i].action == action
    # identity-major, then action, then repetition
    assert small_corpus.seq_ids[0].endswith("_00")
    assert small_corpus.subject_ids[0] == small_corpus.subject_ids[1]


def test_corpus_noise_seed_contract(small_corpus):
    seed = small_corpus.config.master_seed
    for i, ns in enumerate(small_corpus.noise_seeds):
        assert ns == child_seed(seed, 50000 + i)


def test_corpus_hash_deterministic():
    a = generate_corpus(tiny_config(101))
    b = generate_corpus(tiny_config(101))
    c = generate_corpus(tiny_config(102))
    assert a.content_hash() == b.content_hash()
    assert a.content_hash() != c.content_hash()


def test_corpus_pose_tracks_shape(small_corpus):
    tracks = small_corpus.pose_tracks()
    assert len(tracks) == small_corpus.config.num_sequences
    t = small_corpus.params[0].num_frames
    assert tracks[0].shape == (t, NUM_BODY_JOINTS * 3)


def test_corpus_config_validation():
    with pytest.raises(UsageError):
        tiny_config(1, ids=1)
    with pytest.raises(UsageError):
        tiny_config(1, actions=("moonwalk",))


def test_desk_presets():
    ceti = desk_ceti_config(7)
    assert ceti.name == "desk-ceti"
    assert ceti.num_sequences == 20 * 5 * 6
    assert ceti.actions == ACTIONS
    assert ceti.duration == 3.0 and ceti.fps == 30.0
    horst = desk_horst_config(7)
    assert horst.name == "desk-horst"
    assert horst.num_sequences == 200
    assert horst.trim_cycles == 1
    assert horst.actions == ("walk-normal",)


# === observation remappings ===


def test_remap_point_counts():
    prof = manual_profile()
    seq, _ = generate_sequence(prof, "walk-normal", duration=2.0, fps=30.0, noise_seed=8)
    assert remap_to_17(seq).num_points == 17
    assert remap_to_54(seq).num_points == 54


def test_remap_54_cluster_means_recover_joints():
    from pantomime.kinematics import overcomplete_layout

    prof = manual_profile()
    seq, _ = generate_sequence(prof, "walk-normal", duration=2.0, fps=30.0, noise_seed=8)
    over = remap_to_54(seq)
    layout = overcomplete_layout()
    by_joint = {}
    for m, (j, _) in enumerate(layout):
        by_joint.setdefault(j, []).append(m)
    for j, markers in by_joint.items():
        if len(markers) == 3:
            mean = over.frames[:, markers, :].mean(axis=1)
            assert np.max(np.abs(mean - seq.frames[:, j, :])) < 1e-12


def test_remap_rejects_wrong_point_count():
    prof = manual_profile()
    seq, _ = generate_sequence(prof, "walk-normal", duration=2.0, fps=30.0, noise_seed=8)
    seventeen = remap_to_17(seq)
    with pytest.raises(UsageError):
        remap_to_17(seventeen)
    with pytest.raises(UsageError):
        remap_to_54(seventeen)
