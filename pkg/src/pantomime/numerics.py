"""Deterministic numeric substrate: seeded RNG, PCA, Adam, gradient checking.

Everything downstream (data generation, training, fitting, attacker) draws its
randomness from SeededRng so whole pipeline runs replay bit-for-bit from one
master seed. No module may touch ambient entropy (time, os.urandom, np.random
global state).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DataError, TrainingError, UsageError

# splitmix64 constants
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_CHILD_SALT = np.uint64(0xD1B54A32D192ED03)

_U64_MAX = 0xFFFFFFFFFFFFFFFF
_INV_2_53 = float(2.0 ** -53)


def _finalize(x: np.ndarray | np.uint64) -> np.ndarray | np.uint64:
    # splitmix64 finalizer; relies on uint64 wraparound
    z = x
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def child_seed(parent_seed: int, index: int) -> int:
    """Derive an independent child seed from a parent seed and a stream index.

    child = finalize(parent XOR finalize(index * GOLDEN + SALT)). Children for
    distinct indices are decorrelated from each other and from the parent's own
    output stream (the salt keeps the two usages on different orbits).
    """
    if index < 0:
        raise UsageError(f"child_seed: index must be >= 0, got {index}")
    p = np.uint64(parent_seed & _U64_MAX)
    i = np.uint64(index & _U64_MAX)
    with np.errstate(over="ignore"):
        salted = _finalize(i * _GOLDEN + _CHILD_SALT)
        return int(_finalize(p ^ salted))


def seed_from_string(text: str) -> int:
    """Stable 64-bit seed for a string id (FNV-1a then splitmix64 finalize)."""
    h = 0xCBF29CE484222325
    for b in text.encode("utf-8"):
        h ^= b
        h = (h * 0x100000001B3) & _U64_MAX
    with np.errstate(over="ignore"):
        return int(_finalize(np.uint64(h)))


class SeededRng:
    """Counter-based splitmix64 generator.

    State is (seed, position): the i-th raw draw is
    finalize(seed + (position + 1) * GOLDEN) with position advancing by one per
    draw, so any point in the stream can be reproduced from the two integers.

    uniform() maps the top 53 bits to [0, 1). normal() applies Box-Muller to
    consecutive uniform pairs (u1, u2):

        r  = sqrt(-2 ln(1 - u1))
        z0 = r cos(2 pi u2)      (emitted first)
        z1 = r sin(2 pi u2)

    An odd-length request consumes a full final pair and discards its sine
    member, so normal(2) and normal(1)+normal(1) differ by design; the draw
    order above is part of the reproducibility contract.
    """

    __slots__ = ("seed", "position")

    def __init__(self, seed: int, position: int = 0):
        if seed < 0 or position < 0:
            raise UsageError("SeededRng: seed and position must be non-negative")
        self.seed = int(seed & _U64_MAX)
        self.position = int(position)

    def _raw(self, n: int) -> np.ndarray:
        if n < 0:
            raise UsageError(f"SeededRng: draw count must be >= 0, got {n}")
        idx = np.arange(self.position + 1, self.position + n + 1, dtype=np.uint64)
        self.position += n
        with np.errstate(over="ignore"):
            return _finalize(np.uint64(self.seed) + idx * _GOLDEN)

    def uniform(self, n: int) -> np.ndarray:
        """n doubles in [0, 1)."""
        return (self._raw(n) >> np.uint64(11)).astype(np.float64) * _INV_2_53

    def normal(self, n: int, mean: float = 0.0, std: float = 1.0) -> np.ndarray:
        """n standard normals (scaled/shifted), Box-Muller, cos member first."""
        pairs = (n + 1) // 2
        u = self.uniform(2 * pairs)
        u1 = u[0::2]
        u2 = u[1::2]
        r = np.sqrt(-2.0 * np.log1p(-u1))
        ang = 2.0 * np.pi * u2
        out = np.empty(2 * pairs)
        out[0::2] = r * np.cos(ang)
        out[1::2] = r * np.sin(ang)
        return mean + std * out[:n]

    def integers(self, n: int, bound: int) -> np.ndarray:
        """n integers uniform on [0, bound). Floor of uniform*bound (the
        O(2^-53) modulo bias is irrelevant at our scales)."""
        if bound <= 0:
            raise UsageError(f"SeededRng.integers: bound must be > 0, got {bound}")
        v = np.floor(self.uniform(n) * bound).astype(np.int64)
        return np.minimum(v, bound - 1)

    def permutation(self, n: int) -> np.ndarray:
        """Deterministic permutation of range(n) (argsort of n uniforms)."""
        return np.argsort(self.uniform(n), kind="stable")

    def spawn(self, index: int) -> "SeededRng":
        """Independent child stream number `index`."""
        return SeededRng(child_seed(self.seed, index))


# === PCA ===


def jacobi_eigh(a: np.ndarray, tol: float = 1e-12, max_sweeps: int = 100):
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns (eigenvalues ascending, eigenvectors as columns), mirroring
    np.linalg.eigh. Slow on purpose: it is the independent oracle the tests
    check pca_fit against, not the production path.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise UsageError(f"jacobi_eigh: need square matrix, got shape {a.shape}")
    if not np.allclose(a, a.T, atol=1e-10):
        raise UsageError("jacobi_eigh: matrix must be symmetric")
    n = a.shape[0]
    m = a.copy()
    v = np.eye(n)
    if n == 1:
        return m.diagonal().copy(), v
    scale = max(1.0, float(np.abs(m).max()))
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.tril(m, -1) ** 2))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(m[p, q]) <= 1e-300:
                    continue
                # classic 2x2 rotation zeroing m[p, q]
                theta = (m[q, q] - m[p, p]) / (2.0 * m[p, q])
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rot_p = c * m[:, p] - s * m[:, q]
                rot_q = s * m[:, p] + c * m[:, q]
                m[:, p] = rot_p
                m[:, q] = rot_q
                rot_p = c * m[p, :] - s * m[q, :]
                rot_q = s * m[p, :] + c * m[q, :]
                m[p, :] = rot_p
                m[q, :] = rot_q
                rot_p = c * v[:, p] - s * v[:, q]
                rot_q = s * v[:, p] + c * v[:, q]
                v[:, p] = rot_p
                v[:, q] = rot_q
    w = m.diagonal().copy()
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


@dataclass(frozen=True)
class PcaModel:
    """Linear projection onto the top principal components.

    mean: (D,) training mean. basis: (D, K) orthonormal columns, components in
    non-increasing eigenvalue order. eigenvalues: (K,) retained variances.
    """

    mean: np.ndarray
    basis: np.ndarray
    eigenvalues: np.ndarray

    @property
    def dim(self) -> int:
        return int(self.mean.shape[0])

    @property
    def k(self) -> int:
        return int(self.basis.shape[1])


def _canonical_signs(basis: np.ndarray) -> np.ndarray:
    # flip each column so its largest-magnitude entry is positive; ties take
    # the first index. keeps eigensolver sign freedom out of the artifacts.
    out = basis.copy()
    for j in range(out.shape[1]):
        col = out[:, j]
        i = int(np.argmax(np.abs(col)))
        if col[i] < 0:
            out[:, j] = -col
    return out


def pca_fit(x: np.ndarray, variance_fraction: float = 0.95) -> PcaModel:
    """Fit PCA retaining the smallest K whose eigenvalue mass reaches the
    requested fraction of total variance (K >= 1 always).

    Uses the covariance eigendecomposition when D <= N and the Gram-matrix
    trick when D > N (u = Xc^T v / sqrt(lambda (N-1))). Denominator N-1.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise UsageError(f"pca_fit: need 2-d data matrix, got shape {x.shape}")
    n, d = x.shape
    if n < 2:
        raise UsageError(f"pca_fit: need at least 2 rows, got {n}")
    if d < 1:
        raise UsageError("pca_fit: need at least 1 column")
    if not np.all(np.isfinite(x)):
        raise DataError("pca_fit: data contains non-finite values")
    if not (0.0 < variance_fraction <= 1.0):
        raise UsageError(
            f"pca_fit: variance_fraction must be in (0, 1], got {variance_fraction}"
        )

    mean = x.mean(axis=0)
    xc = x - mean
    total_var = float(np.sum(xc * xc)) / (n - 1)

    if d <= n:
        cov = (xc.T @ xc) / (n - 1)
        w, vecs = np.linalg.eigh(cov)
        w = w[::-1]
        vecs = vecs[:, ::-1]
    else:
        gram = (xc @ xc.T) / (n - 1)
        w, u = np.linalg.eigh(gram)
        w = w[::-1]
        u = u[:, ::-1]
        vecs = np.zeros((d, min(n, d)))
        for j in range(min(n, d)):
            if w[j] > 1e-12 * max(total_var, 1.0):
                vecs[:, j] = (xc.T @ u[:, j]) / np.sqrt(w[j] * (n - 1))
            else:
                vecs[:, j] = 0.0
        w = w[: min(n, d)]

    w = np.clip(w, 0.0, None)

    if total_var <= 0.0:
        # degenerate: all rows identical; keep one axis so transforms stay shaped
        basis = np.zeros((d, 1))
        basis[0, 0] = 1.0
        return PcaModel(mean=mean, basis=basis, eigenvalues=np.zeros(1))

    csum = np.cumsum(w)
    target = variance_fraction * total_var
    k = int(np.searchsorted(csum, target - 1e-12 * total_var) + 1)
    k = max(1, min(k, len(w)))

    basis = vecs[:, :k].copy()
    # replace any zero columns (rank-deficient tail) with deterministic
    # orthonormal complements so the basis stays column-orthonormal
    for j in range(k):
        if np.linalg.norm(basis[:, j]) < 1e-9:
            for axis in range(d):
                cand = np.zeros(d)
                cand[axis] = 1.0
                cand -= basis[:, :j] @ (basis[:, :j].T @ cand)
                nrm = np.linalg.norm(cand)
                if nrm > 1e-6:
                    basis[:, j] = cand / nrm
                    break
    return PcaModel(mean=mean, basis=_canonical_signs(basis), eigenvalues=w[:k].copy())


def pca_transform(model: PcaModel, x: np.ndarray) -> np.ndarray:
    """Project a vector (D,) or batch (N, D) into the retained subspace."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.dim:
        raise UsageError(
            f"pca_transform: last dim {x.shape[-1]} != model dim {model.dim}"
        )
    return (x - model.mean) @ model.basis


# === Adam ===


@dataclass
class AdamState:
    """Adam optimizer state for one flat parameter vector."""

    m: np.ndarray
    v: np.ndarray
    step: int
    lr: float
    beta1: float
    beta2: float
    eps: float

    @classmethod
    def for_dim(
        cls,
        dim: int,
        lr: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ) -> "AdamState":
        if dim <= 0:
            raise UsageError(f"AdamState: dim must be > 0, got {dim}")
        if not (0.0 <= beta1 < 1.0 and 0.0 <= beta2 < 1.0):
            raise UsageError("AdamState: betas must lie in [0, 1)")
        if lr <= 0.0 or eps <= 0.0:
            raise UsageError("AdamState: lr and eps must be > 0")
        return cls(
            m=np.zeros(dim), v=np.zeros(dim), step=0,
            lr=lr, beta1=beta1, beta2=beta2, eps=eps,
        )


def adam_step(state: AdamState, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
    """One Adam update with bias correction; mutates state, returns new params.

    Raises TrainingError (with the 1-based step index) if the gradient has any
    non-finite entry, so training loops fail loudly instead of silently
    poisoning the moments.
    """
    if params.shape != state.m.shape or grad.shape != state.m.shape:
        raise UsageError(
            f"adam_step: shape mismatch params {params.shape} grad {grad.shape} "
            f"state {state.m.shape}"
        )
    if not np.all(np.isfinite(grad)):
        raise TrainingError(f"adam_step: non-finite gradient at step {state.step + 1}")
    state.step += 1
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * (grad * grad)
    m_hat = state.m / (1.0 - state.beta1 ** state.step)
    v_hat = state.v / (1.0 - state.beta2 ** state.step)
    return params - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)


# === gradient checking ===


def finite_diff_check(
    f: Callable[[np.ndarray], float],
    x: np.ndarray,
    analytic: np.ndarray,
    h: float = 1e-5,
) -> float:
    """Max relative error between central finite differences of f and an
    analytic gradient: max_i |fd_i - an_i| / max(1, |fd_i|, |an_i|)."""
    x = np.asarray(x, dtype=np.float64)
    analytic = np.asarray(analytic, dtype=np.float64)
    if x.shape != analytic.shape:
        raise UsageError(
            f"finite_diff_check: x {x.shape} vs analytic {analytic.shape}"
        )
    flat = x.ravel()
    an = analytic.ravel()
    worst = 0.0
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        f_hi = float(f(x))
        flat[i] = orig - h
        f_lo = float(f(x))
        flat[i] = orig
        fd = (f_hi - f_lo) / (2.0 * h)
        denom = max(1.0, abs(fd), abs(an[i]))
        worst = max(worst, abs(fd - an[i]) / denom)
    return worst
