"""Pose and transition priors: small VAEs trained with manual backprop.

PoseVae models single frames theta (63,): encoder 63-128-128-(16+16) emits
mean and log-variance, decoder 16-128-128-63 reconstructs. TransitionCvae
models consecutive pairs: encoder sees concat(prev, cur) (126) and emits a
32-d latent; the decoder is conditioned on prev (input 32+63) and predicts
the delta, cur_hat = prev + delta.

Loss is the negative ELBO with squared-error reconstruction (summed over
dims, averaged over the batch) and a weighted KL to the standard normal:

    L = mean_b sum_d (x_hat - x)^2 + beta * mean_b 0.5 sum_z (mu^2 + s^2 - log s^2 - 1)

Sampling uses the reparameterization z = mu + sigma * eps.

First-frame convention for transitions (shared with the anonymizer): frame 0
is encoded against itself (prev = cur = theta_0) and decoded against the zero
pose. Training data includes one such start-up sample per sequence so the
rollout's first step is in-distribution.

Hidden activations are tanh, outputs linear. No autodiff framework: every
gradient here is hand-derived and checked by finite differences in the tests.
"""

from __future__ import annotations

import hashlib
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import TrainingError, UsageError
from .kinematics import POSE_DIM
from .numerics import AdamState, SeededRng, adam_step

POSE_LATENT_DIM = 16
TRANSITION_LATENT_DIM = 32
HIDDEN = 128
DEFAULT_KL_WEIGHT = 4.0

POSE_VAE = "pose-vae"
TRANSITION_CVAE = "transition-cvae"
PRIOR_KINDS = (POSE_VAE, TRANSITION_CVAE)


class MlpNetwork:
    """Fully connected net, tanh hidden layers, linear output, manual backprop.

    Weight layout: weights[l] is (out, in), so layer l computes
    a @ W^T + b. Initialization draws each weight matrix row-major from
    U[-1/sqrt(fan_in), +1/sqrt(fan_in)] (biases start at zero); the draw order
    is part of the reproducibility contract.
    """

    def __init__(self, sizes, weights=None, biases=None):
        self.sizes = tuple(int(s) for s in sizes)
        if len(self.sizes) < 2:
            raise UsageError("MlpNetwork: need at least input and output sizes")
        if weights is None:
            self.weights = [
                np.zeros((self.sizes[i + 1], self.sizes[i]))
                for i in range(len(self.sizes) - 1)
            ]
            self.biases = [np.zeros(self.sizes[i + 1]) for i in range(len(self.sizes) - 1)]
        else:
            self.weights = weights
            self.biases = biases
            for i, (w, b) in enumerate(zip(weights, biases)):
                if w.shape != (self.sizes[i + 1], self.sizes[i]) or b.shape != (
                    self.sizes[i + 1],
                ):
                    raise UsageError(f"MlpNetwork: layer {i} arrays do not match sizes")

    @classmethod
    def init(cls, sizes, rng: SeededRng) -> "MlpNetwork":
        net = cls(sizes)
        for i in range(len(net.sizes) - 1):
            fan_in = net.sizes[i]
            bound = 1.0 / np.sqrt(fan_in)
            w = rng.uniform(net.sizes[i + 1] * fan_in) * 2.0 * bound - bound
            net.weights[i] = w.reshape(net.sizes[i + 1], fan_in)
        return net

    @property
    def num_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def get_params(self) -> np.ndarray:
        chunks = []
        for w, b in zip(self.weights, self.biases):
            chunks.append(w.ravel())
            chunks.append(b)
        return np.concatenate(chunks)

    def set_params(self, vec: np.ndarray) -> None:
        if vec.shape != (self.num_params,):
            raise UsageError(
                f"MlpNetwork.set_params: need ({self.num_params},), got {vec.shape}"
            )
        pos = 0
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            self.weights[i] = vec[pos : pos + w.size].reshape(w.shape).copy()
            pos += w.size
            self.biases[i] = vec[pos : pos + b.size].copy()
            pos += b.size

    def forward(self, x: np.ndarray):
        """Returns (output (N, out), cache). x is (N, in)."""
        if x.ndim != 2 or x.shape[1] != self.sizes[0]:
            raise UsageError(
                f"MlpNetwork.forward: need (N, {self.sizes[0]}), got {x.shape}"
            )
        acts = [x]
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w.T + b
            if i != last:
                h = np.tanh(h)
            acts.append(h)
        return h, acts

    def backward(self, cache, dout: np.ndarray):
        """Given dL/doutput, returns (param grad vector, dL/dinput)."""
        grads_w = [None] * len(self.weights)
        grads_b = [None] * len(self.biases)
        delta = dout
        for i in range(len(self.weights) - 1, -1, -1):
            a_prev = cache[i]
            grads_w[i] = delta.T @ a_prev
            grads_b[i] = delta.sum(axis=0)
            dx = delta @ self.weights[i]
            if i > 0:
                dx = dx * (1.0 - cache[i] * cache[i])  # tanh'
            delta = dx
        chunks = []
        for gw, gb in zip(grads_w, grads_b):
            chunks.append(gw.ravel())
            chunks.append(gb)
        return np.concatenate(chunks), delta


@dataclass
class PoseVae:
    """Frame-level pose prior."""

    encoder: MlpNetwork
    decoder: MlpNetwork
    latent_dim: int = POSE_LATENT_DIM
    kl_weight: float = DEFAULT_KL_WEIGHT
    metadata: dict = field(default_factory=dict)

    @property
    def kind(self) -> str:
        return POSE_VAE

    @classmethod
    def init(cls, rng: SeededRng, kl_weight: float = DEFAULT_KL_WEIGHT) -> "PoseVae":
        enc = MlpNetwork.init((POSE_DIM, HIDDEN, HIDDEN, 2 * POSE_LATENT_DIM), rng.spawn(0))
        dec = MlpNetwork.init((POSE_LATENT_DIM, HIDDEN, HIDDEN, POSE_DIM), rng.spawn(1))
        # start with unit posterior variance: zero the log-variance rows
        enc.weights[-1][POSE_LATENT_DIM:, :] = 0.0
        enc.biases[-1][POSE_LATENT_DIM:] = 0.0
        return cls(encoder=enc, decoder=dec, kl_weight=kl_weight)


@dataclass
class TransitionCvae:
    """Pairwise transition prior conditioned on the previous pose."""

    encoder: MlpNetwork
    decoder: MlpNetwork
    latent_dim: int = TRANSITION_LATENT_DIM
    kl_weight: float = DEFAULT_KL_WEIGHT
    metadata: dict = field(default_factory=dict)

    @property
    def kind(self) -> str:
        return TRANSITION_CVAE

    @classmethod
    def init(cls, rng: SeededRng, kl_weight: float = DEFAULT_KL_WEIGHT) -> "TransitionCvae":
        enc = MlpNetwork.init(
            (2 * POSE_DIM, HIDDEN, HIDDEN, 2 * TRANSITION_LATENT_DIM), rng.spawn(0)
        )
        dec = MlpNetwork.init(
            (TRANSITION_LATENT_DIM + POSE_DIM, HIDDEN, HIDDEN, POSE_DIM), rng.spawn(1)
        )
        enc.weights[-1][TRANSITION_LATENT_DIM:, :] = 0.0
        enc.biases[-1][TRANSITION_LATENT_DIM:] = 0.0
        return cls(encoder=enc, decoder=dec, kl_weight=kl_weight)


def _split_stats(enc_out: np.ndarray, dz: int):
    mu = enc_out[:, :dz]
    logvar = enc_out[:, dz:]
    sigma = np.exp(0.5 * logvar)
    return mu, logvar, sigma


# === encode / decode ops ===


def encode_poses(model: PoseVae, theta: np.ndarray, mode: str = "mean",
                 rng: SeededRng | None = None):
    """Encode (T, 63) poses; returns (mu, sigma, z). mode 'mean' takes z = mu
    (the pipeline default); mode 'sample' draws z = mu + sigma * eps."""
    if theta.ndim != 2 or theta.shape[1] != POSE_DIM:
        raise UsageError(f"encode_poses: need (T, {POSE_DIM}), got {theta.shape}")
    out, _ = model.encoder.forward(theta)
    mu, _, sigma = _split_stats(out, model.latent_dim)
    if mode == "mean":
        z = mu.copy()
    elif mode == "sample":
        if rng is None:
            raise UsageError("encode_poses: mode 'sample' needs an rng")
        eps = rng.normal(mu.size).reshape(mu.shape)
        z = mu + sigma * eps
    else:
        raise UsageError(f"encode_poses: unknown mode '{mode}'")
    return mu, sigma, z


def decode_poses(model: PoseVae, z: np.ndarray) -> np.ndarray:
    """Decode (T, d_z) latents to (T, 63) poses."""
    if z.ndim != 2 or z.shape[1] != model.latent_dim:
        raise UsageError(f"decode_poses: need (T, {model.latent_dim}), got {z.shape}")
    out, _ = model.decoder.forward(z)
    return out


def encode_transitions(model: TransitionCvae, theta: np.ndarray, mode: str = "mean",
                       rng: SeededRng | None = None):
    """Encode a (T, 63) pose track into (T, d_z) transition latents.

    Row 0 encodes the self-pair (theta_0, theta_0); row t >= 1 encodes
    (theta_{t-1}, theta_t). Returns (mu, sigma, z)."""
    if theta.ndim != 2 or theta.shape[1] != POSE_DIM:
        raise UsageError(f"encode_transitions: need (T, {POSE_DIM}), got {theta.shape}")
    prev = np.vstack([theta[0:1], theta[:-1]])
    pairs = np.concatenate([prev, theta], axis=1)
    out, _ = model.encoder.forward(pairs)
    mu, _, sigma = _split_stats(out, model.latent_dim)
    if mode == "mean":
        z = mu.copy()
    elif mode == "sample":
        if rng is None:
            raise UsageError("encode_transitions: mode 'sample' needs an rng")
        eps = rng.normal(mu.size).reshape(mu.shape)
        z = mu + sigma * eps
    else:
        raise UsageError(f"encode_transitions: unknown mode '{mode}'")
    return mu, sigma, z


def decode_transitions(model: TransitionCvae, z: np.ndarray) -> np.ndarray:
    """Sequential rollout of (T, d_z) latents to a (T, 63) pose track.

    Frame 0 decodes against the zero pose (the start-up convention); frame t
    decodes against the previous decoded frame: theta_t = theta_{t-1} +
    delta(z_t, theta_{t-1})."""
    if z.ndim != 2 or z.shape[1] != model.latent_dim:
        raise UsageError(f"decode_transitions: need (T, {model.latent_dim}), got {z.shape}")
    t_count = z.shape[0]
    theta = np.zeros((t_count, POSE_DIM))
    prev = np.zeros(POSE_DIM)
    for t in range(t_count):
        inp = np.concatenate([z[t], prev])[None, :]
        delta, _ = model.decoder.forward(inp)
        prev = prev + delta[0]
        theta[t] = prev
    return theta


# === ELBO ===


def elbo_loss(model, batch, kl_weight: float, eps: np.ndarray):
    """Negative ELBO and its parameter gradient for one batch.

    batch: (N, 63) poses for PoseVae, or a (prev, dec_prev, cur) triple of
    (N, 63) arrays for TransitionCvae (dec_prev differs from prev only in the
    start-up samples, where it is the zero pose). eps is the fixed (N, d_z)
    reparameterization draw, passed in so the loss is a deterministic function
    of the parameters (required for gradient checking).

    Returns (total, recon, kl, grad) with grad packed encoder-then-decoder.
    """
    dz = model.latent_dim
    if isinstance(model, PoseVae):
        x = batch
        enc_in = x
        target = x
    elif isinstance(model, TransitionCvae):
        prev, dec_prev, cur = batch
        enc_in = np.concatenate([prev, cur], axis=1)
        target = cur
    else:
        raise UsageError(f"elbo_loss: unsupported model {type(model).__name__}")
    n = enc_in.shape[0]
    if eps.shape != (n, dz):
        raise UsageError(f"elbo_loss: eps must be ({n}, {dz}), got {eps.shape}")

    enc_out, enc_cache = model.encoder.forward(enc_in)
    mu, logvar, sigma = _split_stats(enc_out, dz)
    z = mu + sigma * eps

    if isinstance(model, PoseVae):
        dec_in = z
    else:
        dec_in = np.concatenate([z, dec_prev], axis=1)
    dec_out, dec_cache = model.decoder.forward(dec_in)
    xhat = dec_out if isinstance(model, PoseVae) else dec_prev + dec_out

    diff = xhat - target
    recon = float(np.sum(diff * diff)) / n
    kl = float(0.5 * np.sum(mu * mu + np.exp(logvar) - logvar - 1.0)) / n
    total = recon + kl_weight * kl

    # backward
    dxhat = 2.0 * diff / n
    dec_grad, ddec_in = model.decoder.backward(dec_cache, dxhat)
    dzed = ddec_in[:, :dz] if isinstance(model, TransitionCvae) else ddec_in
    dmu = dzed + kl_weight * mu / n
    dlogvar = dzed * (0.5 * sigma * eps) + kl_weight * 0.5 * (np.exp(logvar) - 1.0) / n
    denc_out = np.concatenate([dmu, dlogvar], axis=1)
    enc_grad, _ = model.encoder.backward(enc_cache, denc_out)
    return total, recon, kl, np.concatenate([enc_grad, dec_grad])


def model_params(model) -> np.ndarray:
    return np.concatenate([model.encoder.get_params(), model.decoder.get_params()])


def set_model_params(model, vec: np.ndarray) -> None:
    ne = model.encoder.num_params
    model.encoder.set_params(vec[:ne])
    model.decoder.set_params(vec[ne:])


# === latent penalty for fitting ===


def latent_prior_penalty(model, theta: np.ndarray):
    """Prior penalty of a (T, 63) pose track and its gradient w.r.t. theta.

    PoseVae: mean over frames of 0.5 ||z_t||^2 + ||D(z_t) - theta_t||^2 with
    z_t the posterior mean; gradients flow through both networks' inputs.
    TransitionCvae: same form over the T-1 consecutive pairs (start-up sample
    excluded), with gradients reaching both frames of each pair.
    """
    if theta.ndim != 2 or theta.shape[1] != POSE_DIM:
        raise UsageError(f"latent_prior_penalty: need (T, {POSE_DIM}), got {theta.shape}")
    t_count = theta.shape[0]
    dz = model.latent_dim

    if isinstance(model, PoseVae):
        enc_out, enc_cache = model.encoder.forward(theta)
        z = enc_out[:, :dz]
        dec_out, dec_cache = model.decoder.forward(z)
        r = dec_out - theta
        val = float(np.mean(0.5 * np.sum(z * z, axis=1) + np.sum(r * r, axis=1)))
        # d/dz: z/T (quadratic) + decoder input grad of ||r||^2 / T
        _, ddec_in = model.decoder.backward(dec_cache, 2.0 * r / t_count)
        dz_total = z / t_count + ddec_in
        denc_out = np.zeros_like(enc_out)
        denc_out[:, :dz] = dz_total
        _, dtheta_enc = model.encoder.backward(enc_cache, denc_out)
        dtheta = dtheta_enc - 2.0 * r / t_count
        return val, dtheta

    if isinstance(model, TransitionCvae):
        if t_count < 2:
            return 0.0, np.zeros_like(theta)
        m = t_count - 1
        prev = theta[:-1]
        cur = theta[1:]
        enc_in = np.concatenate([prev, cur], axis=1)
        enc_out, enc_cache = model.encoder.forward(enc_in)
        z = enc_out[:, :dz]
        dec_in = np.concatenate([z, prev], axis=1)
        dec_out, dec_cache = model.decoder.forward(dec_in)
        r = prev + dec_out - cur
        val = float(np.mean(0.5 * np.sum(z * z, axis=1) + np.sum(r * r, axis=1)))
        dr = 2.0 * r / m
        _, ddec_in = model.decoder.backward(dec_cache, dr)
        dz_total = z / m + ddec_in[:, :dz]
        dprev_dec = ddec_in[:, dz:] + dr          # decoder input + identity path
        denc_out = np.zeros_like(enc_out)
        denc_out[:, :dz] = dz_total
        _, denc_in = model.encoder.backward(enc_cache, denc_out)
        dtheta = np.zeros_like(theta)
        dtheta[:-1] += denc_in[:, :POSE_DIM] + dprev_dec
        dtheta[1:] += denc_in[:, POSE_DIM:] - dr
        return val, dtheta

    raise UsageError(f"latent_prior_penalty: unsupported model {type(model).__name__}")


# === training ===


@dataclass
class TrainingSummary:
    kind: str
    epochs: int
    batch_size: int
    kl_weight: float
    seed: int
    n_train: int
    n_holdout: int
    loss_curve: list
    holdout_recon_mae: float
    rollout_drift: float  # transition models only; 0.0 for pose
    wall_seconds: float


def _assemble_pose_data(tracks):
    return np.vstack(tracks)


def _assemble_transition_data(tracks):
    prevs, dec_prevs, curs = [], [], []
    for tr in tracks:
        if tr.shape[0] < 2:
            continue
        prevs.append(tr[:-1])
        dec_prevs.append(tr[:-1])
        curs.append(tr[1:])
        # start-up sample: self-pair encoding, zero-pose decoder conditioning
        prevs.append(tr[0:1])
        dec_prevs.append(np.zeros((1, POSE_DIM)))
        curs.append(tr[0:1])
    return np.vstack(prevs), np.vstack(dec_prevs), np.vstack(curs)


def train_prior(
    kind: str,
    pose_tracks: list,
    epochs: int,
    batch_size: int,
    kl_weight: float,
    seed: int,
    lr: float = 1e-3,
    holdout_fraction: float = 0.1,
):
    """Train a prior on ground-truth pose tracks (list of (T, 63) arrays).

    A seeded permutation holds out ~holdout_fraction of the sequences for the
    quality metrics. Requires >= 1000 training samples (frames for the pose
    model, transitions for the CVAE). Returns (model, TrainingSummary).
    """
    if kind not in PRIOR_KINDS:
        raise UsageError(f"train_prior: unknown kind '{kind}'")
    # epochs = 0 is legal: the untrained init is returned and the holdout
    # metrics measure it, which is how training gates catch a null run
    if epochs < 0 or batch_size < 1:
        raise UsageError("train_prior: epochs must be >= 0, batch_size >= 1")
    if not pose_tracks:
        raise UsageError("train_prior: no pose tracks given")

    t0 = time.time()
    root = SeededRng(seed)
    perm = root.spawn(2).permutation(len(pose_tracks))
    n_hold = max(1, int(round(holdout_fraction * len(pose_tracks)))) if len(pose_tracks) > 1 else 0
    hold_idx = set(int(i) for i in perm[:n_hold])
    train_tracks = [pose_tracks[i] for i in range(len(pose_tracks)) if i not in hold_idx]
    hold_tracks = [pose_tracks[i] for i in range(len(pose_tracks)) if i in hold_idx]

    if kind == POSE_VAE:
        model = PoseVae.init(root, kl_weight=kl_weight)
        data = _assemble_pose_data(train_tracks)
        n = data.shape[0]
    else:
        model = TransitionCvae.init(root, kl_weight=kl_weight)
        data = _assemble_transition_data(train_tracks)
        n = data[0].shape[0]
    if n < 1000:
        raise UsageError(f"train_prior: need >= 1000 training samples, got {n}")

    params = model_params(model)
    adam = AdamState.for_dim(params.size, lr=lr)
    shuffle_rng = root.spawn(3)
    eps_rng = root.spawn(4)
    dz = model.latent_dim

    curve = []
    for _ in range(epochs):
        order = shuffle_rng.permutation(n)
        total = 0.0
        batches = 0
        for s in range(0, n, batch_size):
            idx = order[s : s + batch_size]
            if kind == POSE_VAE:
                batch = data[idx]
            else:
                batch = (data[0][idx], data[1][idx], data[2][idx])
            eps = eps_rng.normal(len(idx) * dz).reshape(len(idx), dz)
            set_model_params(model, params)
            loss, _, _, grad = elbo_loss(model, batch, kl_weight, eps)
            if not np.isfinite(loss):
                raise TrainingError(f"train_prior: non-finite loss at step {adam.step + 1}")
            params = adam_step(adam, params, grad)
            total += loss
            batches += 1
        curve.append(total / max(1, batches))
    set_model_params(model, params)

    # holdout quality
    mae, drift = _holdout_metrics(model, hold_tracks if hold_tracks else train_tracks[:1])
    summary = TrainingSummary(
        kind=kind,
        epochs=epochs,
        batch_size=batch_size,
        kl_weight=kl_weight,
        seed=seed,
        n_train=n,
        n_holdout=len(hold_tracks),
        loss_curve=curve,
        holdout_recon_mae=mae,
        rollout_drift=drift,
        wall_seconds=time.time() - t0,
    )
    model.metadata.update(
        {
            "kind": kind,
            "epochs": epochs,
            "batch_size": batch_size,
            "kl_weight": kl_weight,
            "seed": seed,
            "holdout_recon_mae": mae,
            "rollout_drift": drift,
        }
    )
    return model, summary


def _holdout_metrics(model, tracks):
    """Mean |reconstruction error| per angle on held-out data, plus (for the
    transition model) the mean end-pose drift of a full deterministic rollout."""
    errs = []
    drifts = []
    for tr in tracks:
        if isinstance(model, PoseVae):
            _, _, z = encode_poses(model, tr, mode="mean")
            rec = decode_poses(model, z)
            errs.append(np.abs(rec - tr).mean())
        else:
            if tr.shape[0] < 2:
                continue
            # per-step teacher-forced reconstruction
            _, _, z = encode_transitions(model, tr, mode="mean")
            prev = tr[:-1]
            dec_in = np.concatenate([z[1:], prev], axis=1)
            delta, _ = model.decoder.forward(dec_in)
            errs.append(np.abs(prev + delta - tr[1:]).mean())
            rolled = decode_transitions(model, z)
            drifts.append(np.abs(rolled[-1] - tr[-1]).mean())
    mae = float(np.mean(errs)) if errs else float("nan")
    drift = float(np.mean(drifts)) if drifts else 0.0
    return mae, drift


def model_hash(model) -> str:
    """Short hex digest over architecture and parameters, for provenance."""
    h = hashlib.sha256()
    h.update(model.kind.encode())
    h.update(np.asarray(model.encoder.sizes, dtype=np.int64).tobytes())
    h.update(np.asarray(model.decoder.sizes, dtype=np.int64).tobytes())
    h.update(model.encoder.get_params().tobytes())
    h.update(model.decoder.get_params().tobytes())
    return h.hexdigest()[:16]


# === artifact payloads (serialized by fileio) ===


def model_to_payload(model):
    meta = {
        "kind": model.kind,
        "latent_dim": int(model.latent_dim),
        "kl_weight": float(model.kl_weight),
        "encoder_sizes": list(model.encoder.sizes),
        "decoder_sizes": list(model.decoder.sizes),
        "metadata": dict(model.metadata),
    }
    blocks = {
        "encoder_params": model.encoder.get_params(),
        "decoder_params": model.decoder.get_params(),
    }
    return meta, blocks


def model_from_payload(meta: dict, blocks: dict):
    kind = meta.get("kind")
    enc = MlpNetwork(tuple(meta["encoder_sizes"]))
    dec = MlpNetwork(tuple(meta["decoder_sizes"]))
    enc.set_params(np.asarray(blocks["encoder_params"], dtype=np.float64))
    dec.set_params(np.asarray(blocks["decoder_params"], dtype=np.float64))
    common = dict(
        encoder=enc,
        decoder=dec,
        latent_dim=int(meta["latent_dim"]),
        kl_weight=float(meta["kl_weight"]),
        metadata=dict(meta.get("metadata", {})),
    )
    if kind == POSE_VAE:
        return PoseVae(**common)
    if kind == TRANSITION_CVAE:
        return TransitionCvae(**common)
    raise UsageError(f"model_from_payload: unknown kind '{kind}'")
