"""Fitting loss oracles, finite-difference checks, and optimizer bookkeeping."""

import numpy as np
import pytest

from pantomime.errors import ConfigurationError, UsageError
from pantomime.kinematics import (
    NUM_BODY_JOINTS,
    POSE_DIM,
    SHAPE_DIM,
    MotionSequence,
    ParamSequence,
    Skeleton,
    default_skeleton,
    forward_kinematics,
)
from pantomime.fitting import (
    FitOptions,
    FitWeights,
    JointMapping,
    consistency_regularizer,
    fit_corpus,
    fit_sequence,
    grid_search_weights,
    identity_mapping,
    overcomplete_mapping,
    prior_loss,
    reconstruction_loss,
    undercomplete_mapping,
)
from pantomime.synthdata import IdentityProfile, generate_sequence


def quick_profile():
    phases = np.linspace(0.0, 2.0 * np.pi, NUM_BODY_JOINTS * 3, endpoint=False)
    return IdentityProfile(
        subject_id="id98",
        shape=np.full(SHAPE_DIM, 0.3),
        cadence=2.0,
        stride_scale=0.45,
        amplitudes=np.full((NUM_BODY_JOINTS, 3), 0.015),
        phases=phases.reshape(NUM_BODY_JOINTS, 3),
        posture=np.zeros((NUM_BODY_JOINTS, 3)),
        seed=1,
    )


def short_observation(action="sit-to-stand", duration=1.2, fps=30.0, seed=55):
    seq, params = generate_sequence(
        quick_profile(), action, duration=duration, fps=fps, noise_seed=seed,
        jitter_sigma=0.0, cadence_jitter=0.0,
    )
    return seq, params


# === mappings ===


def test_identity_mapping_layout():
    m = identity_mapping()
    assert m.num_observed == 22
    assert m.mapped_joints == tuple(range(22))
    assert m.root_proxy == 0


def test_alternate_mappings_cover_expected_points():
    u = undercomplete_mapping()
    assert u.num_observed == 17
    assert len(u.mapped_joints) == 17
    o = overcomplete_mapping()
    assert o.num_observed == 54
    assert o.mapped_joints == tuple(range(22))


@pytest.mark.parametrize(
    "groups,num_obs,proxy",
    [
        (((1, ((0, 1.0),)), (1, ((1, 1.0),))), 2, 0),   # joint mapped twice
        (((1, ()),), 2, 0),                              # no observed points
        (((1, ((5, 1.0),)),), 2, 0),                     # obs index out of range
        (((1, ((0, 0.0),)),), 2, 0),                     # non-positive weight
        (((1, ((0, 1.0),)),), 2, 9),                     # root proxy out of range
    ],
)
def test_joint_mapping_validation(groups, num_obs, proxy):
    with pytest.raises(UsageError):
        JointMapping(groups=groups, num_observed=num_obs, root_proxy=proxy)


def test_fit_settings_validation():
    with pytest.raises(UsageError):
        FitWeights(w_rec=0.0)
    with pytest.raises(UsageError):
        FitWeights(w_prior=-1.0)
    with pytest.raises(UsageError):
        FitOptions(max_iters=0)
    with pytest.raises(UsageError):
        FitOptions(lr=0.0)


# === reconstruction loss ===


def test_reconstruction_loss_zero_at_ground_truth():
    skel = default_skeleton()
    seq, params = short_observation()
    loss, grads = reconstruction_loss(params, seq, identity_mapping(), skel)
    assert loss < 1e-20
    for g in (grads.root, grads.root_orient, grads.pose, grads.shape):
        assert np.max(np.abs(g)) < 1e-12


def test_reconstruction_loss_weighted_average_oracle():
    # two observed points on one joint with weights 1 and 3: the target is
    # their weighted mean and the loss is the squared distance to it
    basis = np.zeros((2, SHAPE_DIM))
    skel = Skeleton(
        joint_names=("root", "tip"),
        parents=np.array([-1, 0]),
        offsets=np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 1.0]]),
        shape_basis=basis,
        right_foot_index=1,
    )
    params = ParamSequence(
        root=np.zeros((1, 3)),
        root_orient=np.zeros((1, 3)),
        pose=np.zeros((1, 1, 3)),
        shape=np.zeros(SHAPE_DIM),
    )
    # tip sits at (0, 0, 1); observed points at z = 2 and z = 4 with weights
    # 1 and 3 average to z = 3.5, so the residual is 2.5
    frames = np.zeros((1, 2, 3))
    frames[0, 0, 2] = 2.0
    frames[0, 1, 2] = 4.0
    obs = MotionSequence(frames=frames, fps=30.0, subject_id="s", action="a")
    mapping = JointMapping(
        groups=((1, ((0, 1.0), (1, 3.0))),), num_observed=2, root_proxy=0
    )
    loss, _ = reconstruction_loss(params, obs, mapping, skel)
    assert loss == pytest.approx(2.5**2, rel=1e-12)


def test_reconstruction_loss_gradient_finite_difference():
    skel = default_skeleton()
    rng = np.random.default_rng(61)
    t = 3
    params = ParamSequence(
        root=rng.normal(size=(t, 3)),
        root_orient=rng.uniform(-0.8, 0.8, size=(t, 3)),
        pose=rng.uniform(-0.6, 0.6, size=(t, NUM_BODY_JOINTS, 3)),
        shape=rng.uniform(-0.4, 0.4, size=SHAPE_DIM),
    )
    frames = rng.normal(size=(t, 22, 3))
    obs = MotionSequence(frames=frames, fps=30.0, subject_id="s", action="a")
    mapping = identity_mapping()
    _, grads = reconstruction_loss(params, obs, mapping, skel)
    h = 1e-6
    for name in ("root", "root_orient", "pose", "shape"):
        arr = getattr(params, name)
        flat = arr.reshape(-1)
        analytic = getattr(grads, name).reshape(-1)
        for idx in rng.choice(flat.size, size=min(10, flat.size), replace=False):
            orig = flat[idx]
            flat[idx] = orig + h
            hi, _ = reconstruction_loss(params, obs, mapping, skel)
            flat[idx] = orig - h
            lo, _ = reconstruction_loss(params, obs, mapping, skel)
            flat[idx] = orig
            fd = (hi - lo) / (2 * h)
            assert abs(analytic[idx] - fd) / max(1.0, abs(fd)) < 1e-5, name


def test_reconstruction_loss_rejects_point_mismatch():
    skel = default_skeleton()
    seq, params = short_observation()
    with pytest.raises(UsageError):
        reconstruction_loss(params, seq, undercomplete_mapping(), skel)


# === consistency terms ===


def test_consistency_terms_at_rest():
    skel = default_skeleton()
    params = ParamSequence.zeros(3)
    terms, g_shape, g_smooth, _ = consistency_regularizer(params, skel)
    assert terms.shape == 0.0
    assert terms.smooth == 0.0
    # the rest pose with the root at the origin puts the feet underground
    assert terms.ground > 0.0
    assert np.all(g_shape.shape == 0.0)
    assert np.all(g_smooth.pose == 0.0)


def test_consistency_ground_term_vanishes_above_floor():
    skel = default_skeleton()
    params = ParamSequence.zeros(2)
    params.root[:, 2] = 2.0
    terms, _, _, g_ground = consistency_regularizer(params, skel)
    assert terms.ground == 0.0
    assert np.all(g_ground.root == 0.0)


def test_consistency_shape_and_smooth_oracles():
    skel = default_skeleton()
    params = ParamSequence.zeros(2)
    params.shape[:] = 0.5
    params.pose[1, 4, 0] = 0.3
    params.root[1, 1] = 0.2
    terms, g_shape, g_smooth, _ = consistency_regularizer(params, skel)
    assert terms.shape == pytest.approx(SHAPE_DIM * 0.25, rel=1e-12)
    want_smooth = 0.3**2 / POSE_DIM + 0.2**2 / 3.0
    assert terms.smooth == pytest.approx(want_smooth, rel=1e-12)
    assert np.allclose(g_shape.shape, 1.0)
    assert g_smooth.pose[1, 4, 0] == pytest.approx(2 * 0.3 / POSE_DIM, rel=1e-12)
    assert g_smooth.pose[0, 4, 0] == pytest.approx(-2 * 0.3 / POSE_DIM, rel=1e-12)


def test_consistency_ground_gradient_finite_difference():
    skel = default_skeleton()
    rng = np.random.default_rng(62)
    params = ParamSequence(
        root=rng.normal(size=(2, 3)) * 0.1,
        root_orient=rng.uniform(-0.3, 0.3, size=(2, 3)),
        pose=rng.uniform(-0.3, 0.3, size=(2, NUM_BODY_JOINTS, 3)),
        shape=np.zeros(SHAPE_DIM),
    )
    _, _, _, g_ground = consistency_regularizer(params, skel)
    h = 1e-7
    flat = params.root.reshape(-1)
    analytic = g_ground.root.reshape(-1)
    for idx in range(flat.size):
        orig = flat[idx]
        flat[idx] = orig + h
        hi = consistency_regularizer(params, skel)[0].ground
        flat[idx] = orig - h
        lo = consistency_regularizer(params, skel)[0].ground
        flat[idx] = orig
        fd = (hi - lo) / (2 * h)
        assert abs(analytic[idx] - fd) / max(1.0, abs(fd)) < 1e-4


def test_prior_loss_touches_pose_only():
    from tests.test_priors import small_pose_vae

    model = small_pose_vae()
    rng = np.random.default_rng(63)
    params = ParamSequence(
        root=rng.normal(size=(3, 3)),
        root_orient=rng.normal(size=(3, 3)),
        pose=rng.uniform(-0.5, 0.5, size=(3, NUM_BODY_JOINTS, 3)),
        shape=rng.normal(size=SHAPE_DIM),
    )
    val, grads = prior_loss(model, params)
    assert val > 0.0
    assert np.all(grads.root == 0.0)
    assert np.all(grads.root_orient == 0.0)
    assert np.all(grads.shape == 0.0)
    assert np.any(grads.pose != 0.0)


# === sequence fitting ===


def test_fit_sequence_recovers_clean_observation():
    skel = default_skeleton()
    seq, truth = short_observation()
    res = fit_sequence(seq, identity_mapping(), FitWeights(), None, skel)
    assert not res.failed
    assert res.rmse < 0.02
    assert res.per_frame_rmse.shape == (seq.num_frames,)
    assert np.max(res.per_frame_rmse) < 0.05
    assert res.fps == seq.fps
    assert res.prior_kind == "none"
    assert res.iterations <= FitOptions().max_iters
    assert set(res.loss_parts) == {"rec", "prior", "shape", "smooth", "ground"}


def test_fit_sequence_deterministic():
    skel = default_skeleton()
    seq, _ = short_observation()
    opts = FitOptions(max_iters=40)
    a = fit_sequence(seq, identity_mapping(), FitWeights(), None, skel, opts)
    b = fit_sequence(seq, identity_mapping(), FitWeights(), None, skel, opts)
    assert np.array_equal(a.params.pose, b.params.pose)
    assert np.array_equal(a.params.shape, b.params.shape)
    assert a.total_loss == b.total_loss


def test_fit_sequence_rejects_mapping_mismatch():
    skel = default_skeleton()
    seq, _ = short_observation()
    with pytest.raises(UsageError):
        fit_sequence(seq, undercomplete_mapping(), FitWeights(), None, skel)


def test_fit_sequence_records_divergence():
    skel = default_skeleton()
    seq, _ = short_observation()
    opts = FitOptions(max_iters=3, lr=1e155)
    res = fit_sequence(seq, identity_mapping(), FitWeights(), None, skel, opts)
    assert res.failed
    assert "non-finite" in res.failure_reason
    assert np.isnan(res.rmse)
    assert np.all(np.isnan(res.per_frame_rmse))


def test_fit_corpus_bookkeeping():
    skel = default_skeleton()
    seqs = [short_observation(seed=s)[0] for s in (1, 2)]
    calls = []
    coll = fit_corpus(
        seqs, identity_mapping(), FitWeights(), None, skel,
        FitOptions(max_iters=30), base_seed=100,
        progress=lambda i, n, res: calls.append((i, n, res.failed)),
    )
    assert len(coll.results) == 2
    assert coll.failed_indices == []
    assert coll.kept_indices == [0, 1]
    assert coll.num_failed == 0
    assert coll.prior_kind == "none"
    assert calls == [(0, 2, False), (1, 2, False)]
    assert coll.results[0].seed == 100
    assert coll.results[1].seed == 101


def test_grid_search_weights_picks_lowest_rmse():
    skel = default_skeleton()
    seqs = [short_observation(seed=s)[0] for s in (3, 4, 5)]
    sane = FitWeights()
    broken = FitWeights(w_rec=1e-12, w_reg_smooth=10.0)  # ignores the data
    best, table = grid_search_weights(
        seqs, identity_mapping(), None, skel, [broken, sane],
        sample_seed=9, sample_size=2, options=FitOptions(max_iters=60),
    )
    assert best is sane
    assert len(table) == 2
    rmse_by_weights = {id(w): r for w, r, _ in table}
    assert rmse_by_weights[id(sane)] < rmse_by_weights[id(broken)]


def test_grid_search_weights_rejects_empty_grid():
    skel = default_skeleton()
    with pytest.raises(UsageError):
        grid_search_weights([], identity_mapping(), None, skel, [], sample_seed=1)
