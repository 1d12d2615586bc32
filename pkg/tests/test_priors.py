"""Network backprop, ELBO gradients, encode/decode contracts, and training
bookkeeping, checked against finite differences and hand oracles."""

import numpy as np
import pytest

from pantomime.errors import TrainingError, UsageError
from pantomime.kinematics import POSE_DIM
from pantomime.numerics import SeededRng, finite_diff_check
from pantomime.priors import (
    POSE_VAE,
    TRANSITION_CVAE,
    MlpNetwork,
    PoseVae,
    TransitionCvae,
    decode_poses,
    decode_transitions,
    elbo_loss,
    encode_poses,
    encode_transitions,
    latent_prior_penalty,
    model_from_payload,
    model_hash,
    model_params,
    model_to_payload,
    set_model_params,
    train_prior,
)


def small_pose_vae(seed=5, dz=4):
    rng = SeededRng(seed)
    enc = MlpNetwork.init((POSE_DIM, 8, 2 * dz), rng.spawn(0))
    dec = MlpNetwork.init((dz, 8, POSE_DIM), rng.spawn(1))
    return PoseVae(encoder=enc, decoder=dec, latent_dim=dz)


def small_transition_cvae(seed=6, dz=3):
    rng = SeededRng(seed)
    enc = MlpNetwork.init((2 * POSE_DIM, 8, 2 * dz), rng.spawn(0))
    dec = MlpNetwork.init((dz + POSE_DIM, 8, POSE_DIM), rng.spawn(1))
    return TransitionCvae(encoder=enc, decoder=dec, latent_dim=dz)


# === MlpNetwork ===


def test_mlp_single_layer_is_affine():
    net = MlpNetwork((2, 3))
    net.weights[0] = np.array([[1.0, 2.0], [0.0, -1.0], [3.0, 0.5]])
    net.biases[0] = np.array([0.1, 0.2, 0.3])
    x = np.array([[1.0, 1.0], [2.0, -1.0]])
    out, _ = net.forward(x)
    want = x @ net.weights[0].T + net.biases[0]
    assert np.array_equal(out, want)


def test_mlp_hidden_layers_use_tanh():
    rng = SeededRng(8)
    net = MlpNetwork.init((2, 4, 1), rng)
    x = np.array([[0.3, -0.7]])
    out, _ = net.forward(x)
    h = np.tanh(x @ net.weights[0].T + net.biases[0])
    want = h @ net.weights[1].T + net.biases[1]
    assert np.max(np.abs(out - want)) < 1e-15


def test_mlp_init_bounds_and_determinism():
    a = MlpNetwork.init((5, 7, 2), SeededRng(9))
    b = MlpNetwork.init((5, 7, 2), SeededRng(9))
    assert np.array_equal(a.get_params(), b.get_params())
    assert np.max(np.abs(a.weights[0])) <= 1.0 / np.sqrt(5)
    assert np.max(np.abs(a.weights[1])) <= 1.0 / np.sqrt(7)
    assert np.all(a.biases[0] == 0.0) and np.all(a.biases[1] == 0.0)


def test_mlp_param_vector_round_trip():
    net = MlpNetwork.init((3, 5, 2), SeededRng(10))
    vec = net.get_params()
    other = MlpNetwork((3, 5, 2))
    other.set_params(vec)
    x = np.array([[0.1, -0.2, 0.4]])
    assert np.array_equal(other.forward(x)[0], net.forward(x)[0])
    with pytest.raises(UsageError):
        other.set_params(vec[:-1])


def test_mlp_backward_finite_difference():
    rng = np.random.default_rng(31)
    net = MlpNetwork.init((4, 6, 3), SeededRng(11))
    x = rng.normal(size=(5, 4))
    w = rng.normal(size=(5, 3))

    def loss_of(vec):
        net.set_params(vec)
        out, _ = net.forward(x)
        return float(np.sum(w * out))

    p0 = net.get_params()
    net.set_params(p0)
    out, cache = net.forward(x)
    grad, din = net.backward(cache, w)
    assert finite_diff_check(loss_of, p0.copy(), grad) < 1e-6
    net.set_params(p0)

    def loss_of_input(flat):
        out, _ = net.forward(flat.reshape(5, 4))
        return float(np.sum(w * out))

    assert finite_diff_check(loss_of_input, x.reshape(-1).copy(), din.reshape(-1)) < 1e-6


def test_mlp_rejects_bad_input_shape():
    net = MlpNetwork((3, 2))
    with pytest.raises(UsageError):
        net.forward(np.zeros((4, 5)))


# === encode / decode ===


def test_encode_poses_mean_mode_returns_mu():
    model = small_pose_vae()
    theta = SeededRng(12).normal(6 * POSE_DIM).reshape(6, POSE_DIM)
    mu, sigma, z = encode_poses(model, theta, mode="mean")
    assert np.array_equal(z, mu)
    assert np.all(sigma > 0.0)


def test_encode_poses_sample_mode_is_seeded():
    model = small_pose_vae()
    theta = SeededRng(13).normal(4 * POSE_DIM).reshape(4, POSE_DIM)
    _, _, za = encode_poses(model, theta, mode="sample", rng=SeededRng(77))
    _, _, zb = encode_poses(model, theta, mode="sample", rng=SeededRng(77))
    _, _, zc = encode_poses(model, theta, mode="sample", rng=SeededRng(78))
    mu, _, _ = encode_poses(model, theta, mode="mean")
    assert np.array_equal(za, zb)
    assert not np.array_equal(za, zc)
    assert not np.array_equal(za, mu)


def test_encode_poses_validation():
    model = small_pose_vae()
    with pytest.raises(UsageError):
        encode_poses(model, np.zeros((4, 10)))
    with pytest.raises(UsageError):
        encode_poses(model, np.zeros((4, POSE_DIM)), mode="sample")
    with pytest.raises(UsageError):
        encode_poses(model, np.zeros((4, POSE_DIM)), mode="mode")


def test_decode_poses_validation():
    model = small_pose_vae()
    with pytest.raises(UsageError):
        decode_poses(model, np.zeros((4, model.latent_dim + 1)))


def test_encode_transitions_row_zero_is_self_pair():
    model = small_transition_cvae()
    theta = SeededRng(14).normal(5 * POSE_DIM).reshape(5, POSE_DIM)
    mu, _, _ = encode_transitions(model, theta, mode="mean")
    self_pair = np.concatenate([theta[0:1], theta[0:1]], axis=1)
    out, _ = model.encoder.forward(self_pair)
    assert np.max(np.abs(mu[0] - out[0, : model.latent_dim])) < 1e-15
    pair3 = np.concatenate([theta[2:3], theta[3:4]], axis=1)
    out3, _ = model.encoder.forward(pair3)
    assert np.max(np.abs(mu[3] - out3[0, : model.latent_dim])) < 1e-15


def test_decode_transitions_accumulates_deltas():
    model = small_transition_cvae()
    z = SeededRng(15).normal(4 * model.latent_dim).reshape(4, model.latent_dim)
    rolled = decode_transitions(model, z)
    prev = np.zeros(POSE_DIM)
    for t in range(4):
        inp = np.concatenate([z[t], prev])[None, :]
        delta, _ = model.decoder.forward(inp)
        prev = prev + delta[0]
        assert np.array_equal(rolled[t], prev)


# === ELBO and penalty gradients ===


def test_elbo_gradient_pose_vae():
    model = small_pose_vae(seed=21)
    rng = SeededRng(22)
    batch = rng.normal(6 * POSE_DIM).reshape(6, POSE_DIM)
    eps = rng.normal(6 * model.latent_dim).reshape(6, model.latent_dim)
    p0 = model_params(model)
    _, _, _, grad = elbo_loss(model, batch, 0.7, eps)

    def f(vec):
        set_model_params(model, vec)
        total, _, _, _ = elbo_loss(model, batch, 0.7, eps)
        return total

    assert finite_diff_check(f, p0.copy(), grad) < 1e-5


def test_elbo_gradient_transition_cvae():
    model = small_transition_cvae(seed=23)
    rng = SeededRng(24)
    theta = rng.normal(5 * POSE_DIM).reshape(5, POSE_DIM)
    prev, cur = theta[:-1], theta[1:]
    batch = (prev, prev, cur)
    eps = rng.normal(4 * model.latent_dim).reshape(4, model.latent_dim)
    p0 = model_params(model)
    _, _, _, grad = elbo_loss(model, batch, 1.3, eps)

    def f(vec):
        set_model_params(model, vec)
        total, _, _, _ = elbo_loss(model, batch, 1.3, eps)
        return total

    assert finite_diff_check(f, p0.copy(), grad) < 1e-5


def test_elbo_loss_parts_consistent():
    model = small_pose_vae(seed=25)
    rng = SeededRng(26)
    batch = rng.normal(4 * POSE_DIM).reshape(4, POSE_DIM)
    eps = np.zeros((4, model.latent_dim))
    total, recon, kl, _ = elbo_loss(model, batch, 2.0, eps)
    assert total == pytest.approx(recon + 2.0 * kl, rel=1e-12)
    assert kl >= 0.0


def test_elbo_rejects_bad_eps_shape():
    model = small_pose_vae()
    with pytest.raises(UsageError):
        elbo_loss(model, np.zeros((4, POSE_DIM)), 1.0, np.zeros((3, model.latent_dim)))


@pytest.mark.parametrize("builder", [small_pose_vae, small_transition_cvae])
def test_latent_penalty_gradient(builder):
    model = builder()
    theta0 = SeededRng(27).normal(5 * POSE_DIM).reshape(5, POSE_DIM)
    _, dtheta = latent_prior_penalty(model, theta0)

    def f(flat):
        val, _ = latent_prior_penalty(model, flat.reshape(5, POSE_DIM))
        return val

    assert finite_diff_check(f, theta0.reshape(-1).copy(), dtheta.reshape(-1)) < 1e-5


def test_latent_penalty_single_frame_transition_is_zero():
    model = small_transition_cvae()
    val, grad = latent_prior_penalty(model, np.zeros((1, POSE_DIM)))
    assert val == 0.0
    assert np.all(grad == 0.0)


# === training ===


def synthetic_tracks(n=20, t=60, seed=30):
    rng = SeededRng(seed)
    # smooth low-frequency tracks, enough structure for the loss to descend
    tracks = []
    for i in range(n):
        base = rng.normal(POSE_DIM, std=0.3)
        phase = rng.uniform(POSE_DIM) * 2 * np.pi
        times = np.arange(t)[:, None] / 30.0
        tracks.append(base[None, :] + 0.2 * np.sin(2 * np.pi * times + phase[None, :]))
    return tracks


def test_train_prior_validation():
    tracks = synthetic_tracks(n=2, t=10)
    with pytest.raises(UsageError):
        train_prior("mystery", tracks, epochs=1, batch_size=8, kl_weight=1.0, seed=1)
    with pytest.raises(UsageError):
        train_prior(POSE_VAE, tracks, epochs=-1, batch_size=8, kl_weight=1.0, seed=1)
    with pytest.raises(UsageError):
        train_prior(POSE_VAE, tracks, epochs=1, batch_size=0, kl_weight=1.0, seed=1)
    with pytest.raises(UsageError):
        train_prior(POSE_VAE, [], epochs=1, batch_size=8, kl_weight=1.0, seed=1)
    with pytest.raises(UsageError):
        # 2 tracks x 10 frames is far below the 1000-sample floor
        train_prior(POSE_VAE, tracks, epochs=1, batch_size=8, kl_weight=1.0, seed=1)


def test_train_prior_epochs_zero_measures_init():
    tracks = synthetic_tracks()
    model, summary = train_prior(
        POSE_VAE, tracks, epochs=0, batch_size=128, kl_weight=1.0, seed=41
    )
    assert summary.loss_curve == []
    assert np.isfinite(summary.holdout_recon_mae)
    assert summary.rollout_drift == 0.0
    assert summary.n_holdout == 2
    assert summary.n_train == 18 * 60


def test_train_prior_deterministic_and_descending():
    tracks = synthetic_tracks()
    ma, sa = train_prior(POSE_VAE, tracks, epochs=3, batch_size=128, kl_weight=0.1, seed=42)
    mb, sb = train_prior(POSE_VAE, tracks, epochs=3, batch_size=128, kl_weight=0.1, seed=42)
    assert model_hash(ma) == model_hash(mb)
    assert sa.loss_curve == sb.loss_curve
    assert sa.loss_curve[-1] < sa.loss_curve[0]
    mc, _ = train_prior(POSE_VAE, tracks, epochs=3, batch_size=128, kl_weight=0.1, seed=43)
    assert model_hash(mc) != model_hash(ma)


def test_train_transition_prior_summary():
    tracks = synthetic_tracks()
    model, summary = train_prior(
        TRANSITION_CVAE, tracks, epochs=2, batch_size=128, kl_weight=1.0, seed=44
    )
    assert model.kind == TRANSITION_CVAE
    assert summary.kind == TRANSITION_CVAE
    # n-1 consecutive pairs plus one start-up sample per track
    assert summary.n_train == 18 * 60
    assert summary.rollout_drift > 0.0
    assert len(summary.loss_curve) == 2


def test_train_prior_rejects_non_finite_data():
    tracks = synthetic_tracks()
    tracks[3] = tracks[3].copy()
    tracks[3][7, 5] = np.nan
    with pytest.raises(TrainingError):
        train_prior(POSE_VAE, tracks, epochs=1, batch_size=128, kl_weight=1.0, seed=45)


# === payloads ===


@pytest.mark.parametrize("builder", [small_pose_vae, small_transition_cvae])
def test_model_payload_round_trip(builder):
    model = builder()
    model.metadata["note"] = "probe"
    meta, blocks = model_to_payload(model)
    back = model_from_payload(meta, blocks)
    assert back.kind == model.kind
    assert back.latent_dim == model.latent_dim
    assert back.metadata == model.metadata
    assert model_hash(back) == model_hash(model)


def test_model_hash_tracks_parameters():
    model = small_pose_vae()
    before = model_hash(model)
    model.decoder.weights[0][0, 0] += 1e-9
    assert model_hash(model) != before


def test_model_from_payload_rejects_unknown_kind():
    model = small_pose_vae()
    meta, blocks = model_to_payload(model)
    meta = dict(meta, kind="gan")
    with pytest.raises(UsageError):
        model_from_payload(meta, blocks)
