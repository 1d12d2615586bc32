"""Rotation, skeleton, and FK tests against closed-form oracles and finite
differences."""

import numpy as np
import pytest

from pantomime.errors import FileFormatError, ShapeError, UsageError
from pantomime.kinematics import (
    NUM_BODY_JOINTS,
    SHAPE_DIM,
    BodyParams,
    MotionSequence,
    ParamSequence,
    Skeleton,
    axis_angle_jacobian,
    axis_angle_to_matrix,
    bone_lengths,
    default_skeleton,
    fk_backward,
    fk_single,
    fk_with_cache,
    forward_kinematics,
    load_skeleton,
    rest_skeleton,
    root_translation_from_right_foot,
    save_skeleton,
    scaled_offsets,
    wrap_axis_angle,
)


def random_params(rng, t=4, pose_scale=0.8, shape_scale=0.5):
    return ParamSequence(
        root=rng.normal(size=(t, 3)),
        root_orient=rng.uniform(-1.2, 1.2, size=(t, 3)),
        pose=rng.uniform(-pose_scale, pose_scale, size=(t, NUM_BODY_JOINTS, 3)),
        shape=rng.uniform(-shape_scale, shape_scale, size=SHAPE_DIM),
    )


# === axis-angle ===


def test_axis_angle_zero_is_identity():
    assert np.array_equal(axis_angle_to_matrix(np.zeros(3)), np.eye(3))


def test_axis_angle_quarter_turn_about_z():
    r = axis_angle_to_matrix(np.array([0.0, 0.0, np.pi / 2]))
    want = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    assert np.max(np.abs(r - want)) < 1e-12


def test_axis_angle_half_turn_about_x():
    r = axis_angle_to_matrix(np.array([np.pi, 0.0, 0.0]))
    want = np.diag([1.0, -1.0, -1.0])
    assert np.max(np.abs(r - want)) < 1e-12


def test_axis_angle_matrices_are_rotations():
    rng = np.random.default_rng(3)
    v = rng.normal(scale=1.5, size=(64, 3))
    r = axis_angle_to_matrix(v)
    eye = np.broadcast_to(np.eye(3), r.shape)
    assert np.max(np.abs(r @ r.transpose(0, 2, 1) - eye)) < 1e-12
    assert np.max(np.abs(np.linalg.det(r) - 1.0)) < 1e-12


def test_axis_angle_same_axis_composition():
    axis = np.array([1.0, 2.0, -0.5])
    axis /= np.linalg.norm(axis)
    a, b = 0.7, -1.3
    lhs = axis_angle_to_matrix(a * axis) @ axis_angle_to_matrix(b * axis)
    rhs = axis_angle_to_matrix((a + b) * axis)
    assert np.max(np.abs(lhs - rhs)) < 1e-12


def test_axis_angle_batch_matches_per_element():
    rng = np.random.default_rng(4)
    v = rng.normal(size=(5, 7, 3))
    batch = axis_angle_to_matrix(v)
    assert batch.shape == (5, 7, 3, 3)
    for i in range(5):
        for j in range(7):
            assert np.array_equal(batch[i, j], axis_angle_to_matrix(v[i, j]))


def test_axis_angle_series_branch_matches_high_precision():
    # below the small-angle cutoff the series must agree with the exact
    # Rodrigues coefficients evaluated in extended precision
    axis = np.array([0.6, -0.8, 0.0])
    t = 0.99e-4
    v = t * axis
    tl = np.longdouble(t)
    a = float(np.sin(tl) / tl)
    b = float((1.0 - np.cos(tl)) / (tl * tl))
    k = np.array(
        [
            [0.0, -v[2], v[1]],
            [v[2], 0.0, -v[0]],
            [-v[1], v[0], 0.0],
        ]
    )
    want = np.eye(3) + a * k + b * (k @ k)
    assert np.max(np.abs(axis_angle_to_matrix(v) - want)) < 1e-9


def test_axis_angle_rejects_bad_last_dim():
    with pytest.raises(UsageError):
        axis_angle_to_matrix(np.zeros((4, 2)))


@pytest.mark.parametrize("scale", [1.5, 1e-5])
def test_axis_angle_jacobian_finite_difference(scale):
    rng = np.random.default_rng(11)
    h = 1e-6
    for _ in range(5):
        v = rng.normal(scale=scale, size=3)
        jac = axis_angle_jacobian(v)
        for i in range(3):
            e = np.zeros(3)
            e[i] = h
            fd = (axis_angle_to_matrix(v + e) - axis_angle_to_matrix(v - e)) / (2 * h)
            assert np.max(np.abs(jac[i] - fd)) < 1e-6


def test_wrap_axis_angle_norm_and_rotation():
    rng = np.random.default_rng(12)
    v = rng.normal(scale=4.0, size=(40, 3))
    w = wrap_axis_angle(v)
    assert np.all(np.linalg.norm(w, axis=-1) <= np.pi + 1e-12)
    assert np.max(np.abs(axis_angle_to_matrix(v) - axis_angle_to_matrix(w))) < 1e-9


def test_wrap_axis_angle_three_pi():
    v = np.array([3 * np.pi, 0.0, 0.0])
    w = wrap_axis_angle(v)
    assert np.allclose(w, [-np.pi, 0.0, 0.0], atol=1e-12)


def test_wrap_axis_angle_small_vector_unchanged():
    v = np.array([0.1, -0.2, 0.05])
    assert np.array_equal(wrap_axis_angle(v), v)


# === skeleton and shape ===


def test_default_skeleton_layout():
    skel = default_skeleton()
    assert skel.num_joints == 22
    assert skel.parents[0] == -1
    assert all(skel.parents[j] < j for j in range(1, 22))
    assert np.all(skel.offsets[0] == 0.0)


def test_scaled_offsets_zero_shape_is_rest():
    skel = default_skeleton()
    assert np.array_equal(scaled_offsets(skel, np.zeros(SHAPE_DIM)), skel.offsets)


def test_scaled_offsets_rejects_large_beta():
    skel = default_skeleton()
    beta = np.zeros(SHAPE_DIM)
    beta[0] = 5.5
    with pytest.raises(UsageError):
        scaled_offsets(skel, beta)


def two_joint_skeleton():
    basis = np.zeros((2, SHAPE_DIM))
    basis[1, 0] = 0.5
    return Skeleton(
        joint_names=("root", "tip"),
        parents=np.array([-1, 0]),
        offsets=np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 1.0]]),
        shape_basis=basis,
        right_foot_index=1,
    )


def test_scaled_offsets_rejects_collapsed_bone():
    skel = two_joint_skeleton()
    beta = np.zeros(SHAPE_DIM)
    beta[0] = -3.0  # scale = 1 - 1.5 < 0
    with pytest.raises(ShapeError):
        scaled_offsets(skel, beta)


def test_rest_skeleton_bone_lengths_match_offsets():
    skel = default_skeleton()
    rest = rest_skeleton(skel, np.zeros(SHAPE_DIM))
    lengths = bone_lengths(rest, skel)
    want = np.linalg.norm(skel.offsets[1:], axis=1)
    assert np.max(np.abs(lengths - want)) < 1e-12


@pytest.mark.parametrize(
    "field,value",
    [
        ("parents", np.array([0, 0])),
        ("parents", np.array([-1, 1])),
        ("offsets", np.array([[0.1, 0.0, 0.0], [0.0, 0.0, 1.0]])),
        ("right_foot_index", 7),
    ],
)
def test_skeleton_validation(field, value):
    ok = two_joint_skeleton()
    kwargs = dict(
        joint_names=ok.joint_names,
        parents=ok.parents,
        offsets=ok.offsets,
        shape_basis=ok.shape_basis,
        right_foot_index=ok.right_foot_index,
    )
    kwargs[field] = value
    with pytest.raises(UsageError):
        Skeleton(**kwargs)


def test_skeleton_save_load_round_trip(tmp_path):
    skel = default_skeleton()
    path = str(tmp_path / "skel.json")
    save_skeleton(path, skel)
    back = load_skeleton(path)
    assert back.joint_names == skel.joint_names
    assert np.array_equal(back.parents, skel.parents)
    assert np.array_equal(back.offsets, skel.offsets)
    assert np.array_equal(back.shape_basis, skel.shape_basis)
    assert back.right_foot_index == skel.right_foot_index


def test_load_skeleton_missing_key(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"joints": ["a", "b"]}')
    with pytest.raises(FileFormatError):
        load_skeleton(str(path))


def test_load_skeleton_invalid_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(FileFormatError):
        load_skeleton(str(path))


def test_shipped_skeleton_matches_builtin():
    import pantomime
    from pathlib import Path

    path = Path(pantomime.__file__).parent / "data" / "default_skeleton.json"
    shipped = load_skeleton(str(path))
    skel = default_skeleton()
    assert shipped.joint_names == skel.joint_names
    assert np.array_equal(shipped.parents, skel.parents)
    assert np.array_equal(shipped.offsets, skel.offsets)
    assert np.array_equal(shipped.shape_basis, skel.shape_basis)
    assert shipped.right_foot_index == skel.right_foot_index


# === forward kinematics ===


def test_fk_bone_lengths_pose_invariant():
    skel = default_skeleton()
    rng = np.random.default_rng(21)
    params = random_params(rng, t=6)
    pos = forward_kinematics(skel, params)
    lengths = bone_lengths(pos, skel)  # (T, J-1)
    rest = bone_lengths(rest_skeleton(skel, params.shape), skel)
    assert np.max(np.abs(lengths - rest[None, :])) < 1e-9


def test_fk_translation_equivariance():
    skel = default_skeleton()
    rng = np.random.default_rng(22)
    params = random_params(rng)
    shift = np.array([0.3, -1.1, 2.0])
    moved = params.copy()
    moved.root = moved.root + shift
    a = forward_kinematics(skel, params)
    b = forward_kinematics(skel, moved)
    assert np.max(np.abs(b - (a + shift))) < 1e-12


def test_fk_global_rotation_about_root():
    # with zero base orient, setting the root orient rotates everything about
    # the root joint position
    skel = default_skeleton()
    rng = np.random.default_rng(23)
    params = random_params(rng, t=3)
    params.root_orient = np.zeros_like(params.root_orient)
    w = np.array([0.4, -0.9, 0.7])
    rotated = params.copy()
    rotated.root_orient = np.broadcast_to(w, rotated.root_orient.shape).copy()
    a = forward_kinematics(skel, params)
    b = forward_kinematics(skel, rotated)
    r = axis_angle_to_matrix(w)
    centered = a - params.root[:, None, :]
    want = params.root[:, None, :] + centered @ r.T
    assert np.max(np.abs(b - want)) < 1e-9


def test_fk_single_matches_sequence():
    skel = default_skeleton()
    rng = np.random.default_rng(24)
    params = random_params(rng, t=5)
    pos = forward_kinematics(skel, params)
    frame = fk_single(skel, params.frame(2))
    assert np.max(np.abs(frame - pos[2])) < 1e-12


def fd_check_field(skel, params, loss_w, get, set_, analytic, n_probe, rng, h=1e-6):
    """Central finite differences on a random subset of one parameter field."""
    flat = get(params).reshape(-1)
    errs = []
    for idx in rng.choice(flat.size, size=min(n_probe, flat.size), replace=False):
        orig = flat[idx]
        flat[idx] = orig + h
        set_(params, flat)
        hi = float(np.sum(loss_w * forward_kinematics(skel, params)))
        flat[idx] = orig - h
        set_(params, flat)
        lo = float(np.sum(loss_w * forward_kinematics(skel, params)))
        flat[idx] = orig
        set_(params, flat)
        fd = (hi - lo) / (2 * h)
        ref = max(1.0, abs(fd))
        errs.append(abs(analytic.reshape(-1)[idx] - fd) / ref)
    return max(errs)


def test_fk_backward_finite_difference():
    skel = default_skeleton()
    rng = np.random.default_rng(25)
    params = random_params(rng, t=3)
    loss_w = rng.normal(size=(3, skel.num_joints, 3))
    pos, cache = fk_with_cache(skel, params)
    grads = fk_backward(skel, cache, loss_w)

    def field(name):
        def get(p):
            return getattr(p, name)

        def set_(p, flat):
            getattr(p, name)[...] = flat.reshape(getattr(p, name).shape)

        return get, set_

    for name, analytic in [
        ("root", grads.root),
        ("root_orient", grads.root_orient),
        ("pose", grads.pose),
        ("shape", grads.shape),
    ]:
        get, set_ = field(name)
        err = fd_check_field(skel, params, loss_w, get, set_, analytic, 12, rng)
        assert err < 1e-4, f"{name} gradient mismatch: {err}"


def test_fk_backward_rejects_bad_dpos_shape():
    skel = default_skeleton()
    params = ParamSequence.zeros(2)
    _, cache = fk_with_cache(skel, params)
    with pytest.raises(UsageError):
        fk_backward(skel, cache, np.zeros((2, 5, 3)))


# === containers ===


def test_param_sequence_shape_validation():
    with pytest.raises(UsageError):
        ParamSequence(
            root=np.zeros((4, 3)),
            root_orient=np.zeros((4, 3)),
            pose=np.zeros((3, NUM_BODY_JOINTS, 3)),
            shape=np.zeros(SHAPE_DIM),
        )


def test_motion_sequence_rejects_nan():
    from pantomime.errors import DataError

    frames = np.zeros((3, 2, 3))
    frames[1, 0, 1] = np.nan
    with pytest.raises(DataError):
        MotionSequence(frames=frames, fps=30.0, subject_id="s", action="a")


def test_root_translation_from_right_foot():
    skel = default_skeleton()
    rng = np.random.default_rng(26)
    frames = rng.normal(size=(5, skel.num_joints, 3))
    seq = MotionSequence(frames=frames, fps=30.0, subject_id="s", action="a")
    track = root_translation_from_right_foot(seq, skel)
    rf = frames[:, skel.right_foot_index, :]
    assert np.array_equal(track, rf - rf[0])
    assert np.all(track[0] == 0.0)


def test_root_translation_rejects_point_mismatch():
    skel = default_skeleton()
    seq = MotionSequence(
        frames=np.zeros((4, 17, 3)), fps=30.0, subject_id="s", action="a"
    )
    with pytest.raises(UsageError):
        root_translation_from_right_foot(seq, skel)
