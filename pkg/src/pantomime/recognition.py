"""Biometric identity attacker and action-utility probe.

Pipeline per sequence: resample to a fixed 100 frames, flatten frame-major
into one vector, min-max normalize with training ranges, project onto a PCA
basis fitted on training rows, classify with a one-vs-one RBF-SVM trained by
SMO. Identity tasks split identity-stratified (80/20 per subject); action
tasks split subject-disjoint so no test subject was seen in training.

The adversary model is adaptive: when an anonymization is configured, every
sequence (train and test) is anonymized before splitting, with per-sequence
noise seeds derived from the sequence ids. The attacker therefore knows the
mechanism and its parameters but never the test noise realizations.

Hyperparameters come from a small grid (C x gamma_k) selected by stratified
cross-validation on the training partition, maximizing balanced accuracy.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .anonymizer import (
    AnonymizationConfig,
    DirectNoiseSpec,
    TARGET_ANGLES,
    TARGET_POSITIONS,
    direct_noise_baseline,
    pantomime,
    sequence_seed,
)
from .errors import ConfigurationError, DataError, UsageError
from .kinematics import MotionSequence, Skeleton
from .numerics import PcaModel, SeededRng, pca_fit, pca_transform
from .synthdata import Corpus

RESAMPLE_FRAMES = 100
DEFAULT_C_GRID = (1.0, 10.0, 100.0)
DEFAULT_GAMMA_SCALES = (1.0, 10.0, 0.1)  # multiples of 1/D after PCA
KKT_TOL = 1e-3
SMO_MAX_ITERS = 20000

TASK_IDENTITY = "identity"
TASK_ACTION = "action"
TASKS = (TASK_IDENTITY, TASK_ACTION)

SPLIT_STRATIFIED = "identity-stratified"
SPLIT_DISJOINT = "subject-disjoint"


# === featurization ===


def resample_sequence(seq: MotionSequence, n: int = RESAMPLE_FRAMES) -> MotionSequence:
    """Linear-interpolation resample to n frames, endpoints preserved exactly."""
    t = seq.num_frames
    if t < 2:
        raise UsageError(f"resample_sequence: need >= 2 frames, got {t}")
    if n < 2:
        raise UsageError(f"resample_sequence: need n >= 2, got {n}")
    s = np.linspace(0.0, t - 1.0, n)
    i0 = np.minimum(s.astype(np.int64), t - 2)
    w = (s - i0)[:, None, None]
    frames = (1.0 - w) * seq.frames[i0] + w * seq.frames[i0 + 1]
    fps = seq.fps * (n - 1) / (t - 1)
    return MotionSequence(frames=frames, fps=fps, subject_id=seq.subject_id, action=seq.action)


def flatten_sequence(seq: MotionSequence) -> np.ndarray:
    """Frame-major, then point, then coordinate: (T, P, 3) -> (T*P*3,)."""
    return seq.frames.reshape(-1).copy()


def featurize(seq: MotionSequence, n: int = RESAMPLE_FRAMES) -> np.ndarray:
    return flatten_sequence(resample_sequence(seq, n))


def minmax_fit(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-dimension (min, max) over training rows."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise UsageError(f"minmax_fit: need (N >= 2, D) matrix, got {x.shape}")
    return x.min(axis=0), x.max(axis=0)


def minmax_apply(ranges: tuple[np.ndarray, np.ndarray], x: np.ndarray) -> np.ndarray:
    """(x - min) / (max - min); constant dimensions map to 0; no clamping."""
    lo, hi = ranges
    x = np.asarray(x, dtype=np.float64)
    span = hi - lo
    const = span == 0
    safe = np.where(const, 1.0, span)
    out = (x - lo) / safe
    if x.ndim == 1:
        out[const] = 0.0
    else:
        out[:, const] = 0.0
    return out


# === kernel and SVM ===


def rbf_kernel(x: np.ndarray, y: np.ndarray, gamma_k: float) -> np.ndarray:
    """exp(-gamma_k * ||x - y||^2), rowwise between two matrices (or vectors)."""
    if gamma_k <= 0:
        raise UsageError(f"rbf_kernel: gamma_k must be > 0, got {gamma_k}")
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.atleast_2d(np.asarray(y, dtype=np.float64))
    if x.shape[1] != y.shape[1]:
        raise UsageError(f"rbf_kernel: dimension mismatch {x.shape[1]} vs {y.shape[1]}")
    sq = (
        np.sum(x * x, axis=1)[:, None]
        + np.sum(y * y, axis=1)[None, :]
        - 2.0 * (x @ y.T)
    )
    out = np.exp(-gamma_k * np.maximum(sq, 0.0))
    return out


@dataclass
class BinarySvm:
    """One trained class pair: f(x) = sum_k coef_k K(sv_k, x) + bias."""

    support_vectors: np.ndarray  # (S, D)
    coefs: np.ndarray            # (S,) alpha_k * y_k
    bias: float
    gamma_k: float
    iterations: int
    converged: bool

    def decision(self, x: np.ndarray) -> np.ndarray:
        k = rbf_kernel(self.support_vectors, np.atleast_2d(x), self.gamma_k)
        return self.coefs @ k + self.bias


def _smo_solve(k: np.ndarray, y: np.ndarray, c: float, tol: float, max_iters: int):
    """Sequential minimal optimization on a precomputed kernel matrix.

    First index by maximal KKT violation, second by largest analytic
    objective decrease (second-order working-set selection); terminates when
    the violation gap drops below tol. Returns (alpha, bias, iterations,
    converged).
    """
    n = y.shape[0]
    alpha = np.zeros(n)
    u = np.zeros(n)  # sum_m alpha_m y_m K(m, .), bias-free margins
    pos = y > 0
    kdiag = np.ascontiguousarray(np.diag(k))
    it = 0
    converged = False
    while it < max_iters:
        it += 1
        grad = y - u  # -y_k * (dObjective/dalpha_k)
        at_c = alpha >= c
        at_0 = alpha <= 0
        up = np.where(pos, ~at_c, ~at_0)
        low = np.where(pos, ~at_0, ~at_c)
        gi = np.where(up, grad, -np.inf)
        i = int(np.argmax(gi))
        m_up = gi[i]
        gj = np.where(low, grad, np.inf)
        m_low = gj.min()
        if not np.isfinite(m_up) or not np.isfinite(m_low) or m_up - m_low < tol:
            converged = True
            break
        diff = m_up - grad
        eta_row = np.maximum(kdiag[i] + kdiag - 2.0 * k[i], 1e-12)
        gain = np.where(low & (grad < m_up), diff * diff / eta_row, -np.inf)
        j = int(np.argmax(gain))
        if y[i] != y[j]:
            lo = max(0.0, alpha[j] - alpha[i])
            hi = min(c, c + alpha[j] - alpha[i])
        else:
            lo = max(0.0, alpha[i] + alpha[j] - c)
            hi = min(c, alpha[i] + alpha[j])
        # E_k = u_k - y_k; the Platt step on alpha_j uses E_i - E_j
        aj_new = alpha[j] + y[j] * ((u[i] - y[i]) - (u[j] - y[j])) / eta_row[j]
        aj_new = min(max(aj_new, lo), hi)
        if abs(aj_new - alpha[j]) < 1e-14:
            break
        ai_new = alpha[i] + y[i] * y[j] * (alpha[j] - aj_new)
        u += (ai_new - alpha[i]) * y[i] * k[i] + (aj_new - alpha[j]) * y[j] * k[j]
        alpha[i] = ai_new
        alpha[j] = aj_new

    grad = y - u
    free = (alpha > 1e-12) & (alpha < c - 1e-12)
    if free.any():
        bias = float(np.mean(grad[free]))
    else:
        up = np.where(pos, alpha < c, alpha > 0)
        low = np.where(pos, alpha > 0, alpha < c)
        hi_part = np.max(grad[up]) if up.any() else 0.0
        lo_part = np.min(grad[low]) if low.any() else 0.0
        bias = float((hi_part + lo_part) / 2.0)
    return alpha, bias, it, converged


@dataclass
class OvoSvm:
    """One-vs-one multiclass RBF-SVM."""

    labels: tuple
    machines: dict  # (i, j) label-index pair -> BinarySvm
    c: float
    gamma_k: float
    hit_iteration_cap: bool

    def predict(self, x: np.ndarray) -> list:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        n = x.shape[0]
        votes = np.zeros((n, len(self.labels)), dtype=np.int64)
        for (i, j), svm in self.machines.items():
            dec = svm.decision(x)
            votes[:, i] += dec > 0
            votes[:, j] += dec <= 0
        # ties break to the lowest label: argmax returns the first maximum
        # and labels are stored sorted
        idx = np.argmax(votes, axis=1)
        return [self.labels[k] for k in idx]


def svm_train(
    features: np.ndarray,
    labels,
    c: float,
    gamma_k: float,
    tol: float = KKT_TOL,
    max_iters: int = SMO_MAX_ITERS,
) -> OvoSvm:
    """Train a one-vs-one RBF-SVM with SMO per class pair."""
    x = np.asarray(features, dtype=np.float64)
    labels = list(labels)
    if x.ndim != 2 or x.shape[0] != len(labels):
        raise UsageError("svm_train: features must be (N, D) aligned with labels")
    classes = sorted(set(labels))
    if len(classes) < 2:
        raise UsageError("svm_train: need >= 2 classes")
    counts = {cl: labels.count(cl) for cl in classes}
    thin = [cl for cl, n in counts.items() if n < 2]
    if thin:
        raise UsageError(f"svm_train: classes with < 2 samples: {thin}")
    lab_arr = np.asarray(labels, dtype=object)
    machines = {}
    cap_hit = False
    for i in range(len(classes)):
        for j in range(i + 1, len(classes)):
            sel = (lab_arr == classes[i]) | (lab_arr == classes[j])
            xs = x[sel]
            ys = np.where(lab_arr[sel] == classes[i], 1.0, -1.0)
            k = rbf_kernel(xs, xs, gamma_k)
            alpha, bias, its, conv = _smo_solve(k, ys, c, tol, max_iters)
            if not conv and its >= max_iters:
                cap_hit = True
            keep = alpha > 1e-12
            machines[(i, j)] = BinarySvm(
                support_vectors=xs[keep].copy(),
                coefs=(alpha * ys)[keep].copy(),
                bias=bias,
                gamma_k=gamma_k,
                iterations=its,
                converged=conv,
            )
    if cap_hit:
        warnings.warn("svm_train: SMO iteration cap hit on at least one class pair")
    return OvoSvm(
        labels=tuple(classes),
        machines=machines,
        c=c,
        gamma_k=gamma_k,
        hit_iteration_cap=cap_hit,
    )


def balanced_accuracy(predictions, labels) -> float:
    """Unweighted mean of per-class recall over classes present in labels."""
    predictions = list(predictions)
    labels = list(labels)
    if not labels or len(predictions) != len(labels):
        raise UsageError("balanced_accuracy: predictions and labels must align and be nonempty")
    recalls = []
    for cl in sorted(set(labels)):
        idx = [k for k, lab in enumerate(labels) if lab == cl]
        hit = sum(1 for k in idx if predictions[k] == cl)
        recalls.append(hit / len(idx))
    return float(np.mean(recalls))


# === splits ===


@dataclass(frozen=True)
class SplitPlan:
    kind: str
    seed: int
    test_mask: tuple  # bool per kept sequence
    seq_ids: tuple

    def __post_init__(self):
        if self.kind not in (SPLIT_STRATIFIED, SPLIT_DISJOINT):
            raise UsageError(f"SplitPlan: unknown kind '{self.kind}'")
        if len(self.test_mask) != len(self.seq_ids):
            raise UsageError("SplitPlan: mask and ids must align")

    @property
    def train_indices(self) -> np.ndarray:
        return np.flatnonzero(~np.asarray(self.test_mask, dtype=bool))

    @property
    def test_indices(self) -> np.ndarray:
        return np.flatnonzero(np.asarray(self.test_mask, dtype=bool))


def build_split_plan(kind: str, seq_ids, class_labels, subject_ids, seed: int) -> SplitPlan:
    """Assign sequences to train/test.

    identity-stratified: per class, a seeded shuffle sends round(20%) of the
    class (at least 1) to test. subject-disjoint: a seeded shuffle of the
    subject list sends round(20%) of subjects (at least 1) entirely to test.
    """
    n = len(seq_ids)
    if not (len(class_labels) == len(subject_ids) == n):
        raise UsageError("build_split_plan: id/label lists must align")
    rng = SeededRng(seed)
    test = np.zeros(n, dtype=bool)
    if kind == SPLIT_STRATIFIED:
        by_class: dict = {}
        for idx, lab in enumerate(class_labels):
            by_class.setdefault(lab, []).append(idx)
        for lab in sorted(by_class):
            members = np.asarray(by_class[lab])
            if len(members) < 2:
                raise DataError(f"build_split_plan: class '{lab}' has < 2 sequences")
            perm = rng.permutation(len(members))
            n_test = max(1, int(round(0.2 * len(members))))
            test[members[perm[:n_test]]] = True
    elif kind == SPLIT_DISJOINT:
        subjects = sorted(set(subject_ids))
        if len(subjects) < 2:
            raise DataError("build_split_plan: subject-disjoint split needs >= 2 subjects")
        perm = rng.permutation(len(subjects))
        n_test = max(1, int(round(0.2 * len(subjects))))
        test_subjects = {subjects[k] for k in perm[:n_test]}
        for idx, sub in enumerate(subject_ids):
            if sub in test_subjects:
                test[idx] = True
    else:
        raise UsageError(f"build_split_plan: unknown kind '{kind}'")
    return SplitPlan(kind=kind, seed=seed, test_mask=tuple(bool(b) for b in test),
                     seq_ids=tuple(seq_ids))


def _stratified_folds(labels, num_folds: int, seed: int):
    """Fold index per sample: per class, seeded shuffle then round-robin."""
    rng = SeededRng(seed)
    folds = np.zeros(len(labels), dtype=np.int64)
    by_class: dict = {}
    for idx, lab in enumerate(labels):
        by_class.setdefault(lab, []).append(idx)
    for lab in sorted(by_class):
        members = np.asarray(by_class[lab])
        perm = rng.permutation(len(members))
        for pos, m in enumerate(members[perm]):
            folds[m] = pos % num_folds
    return folds


# === the adaptive attacker ===


@dataclass
class RecognitionModel:
    task: str
    ranges: tuple  # (min, max) per feature dimension
    pca: PcaModel
    svm: OvoSvm
    labels: tuple
    split: SplitPlan
    warnings: tuple = ()

    def transform(self, features: np.ndarray) -> np.ndarray:
        return pca_transform(self.pca, minmax_apply(self.ranges, features))

    def predict_features(self, features: np.ndarray) -> list:
        return self.svm.predict(self.transform(features))

    def predict_sequence(self, seq: MotionSequence) -> str:
        return self.predict_features(featurize(seq)[None, :])[0]


@dataclass
class RecognitionReport:
    task: str
    split_kind: str
    split_seed: int
    labels: tuple
    num_folds: int
    cv_table: list          # rows: {c, gamma_k, fold_scores, mean}
    chosen_c: float
    chosen_gamma_k: float
    test_balanced_accuracy: float
    confusion: np.ndarray   # (classes, classes) rows true, cols predicted
    anonymization: dict | None
    num_train: int
    num_test: int
    warnings: tuple = ()


def anonymize_sequences(corpus: Corpus, anon, fits=None, prior_model=None,
                        skel: Skeleton | None = None):
    """Apply an anonymization arm to every corpus sequence before splitting.

    anon: None (clean data), an AnonymizationConfig (latent path, needs fits +
    prior_model + skel), or a DirectNoiseSpec (positions need nothing extra;
    joint-angles need fits + skel). Returns (sequences, kept_indices): fits
    that failed drop their sequences from both partitions.
    """
    n = len(corpus.sequences)
    if anon is None:
        return list(corpus.sequences), list(range(n))

    if isinstance(anon, AnonymizationConfig):
        if fits is None or prior_model is None or skel is None:
            raise ConfigurationError(
                "anonymize_sequences: latent anonymization needs fits, prior_model, skel"
            )
        out, kept = [], []
        for i in fits.kept_indices:
            res = pantomime(
                fits.results[i], anon, prior_model, skel, seq_id=corpus.seq_ids[i]
            )
            out.append(res.output)
            kept.append(i)
        return out, kept

    if isinstance(anon, DirectNoiseSpec):
        if anon.target == TARGET_POSITIONS:
            out = []
            for i, seq in enumerate(corpus.sequences):
                seed_i = sequence_seed(anon.seed, corpus.seq_ids[i])
                out.append(direct_noise_baseline(
                    anon.target, seq, anon.mode, anon.gamma, seed_i))
            return out, list(range(n))
        if fits is None or skel is None:
            raise ConfigurationError(
                "anonymize_sequences: joint-angle noise needs fits and skel"
            )
        out, kept = [], []
        for i in fits.kept_indices:
            seed_i = sequence_seed(anon.seed, corpus.seq_ids[i])
            out.append(direct_noise_baseline(
                anon.target, fits.results[i], anon.mode, anon.gamma, seed_i, skel=skel))
            kept.append(i)
        return out, kept

    raise UsageError(f"anonymize_sequences: unsupported arm {type(anon).__name__}")


def train_recognizer(
    corpus: Corpus,
    task: str,
    anon=None,
    split_seed: int = 0,
    c_grid=DEFAULT_C_GRID,
    gamma_scales=DEFAULT_GAMMA_SCALES,
    *,
    fits=None,
    prior_model=None,
    skel: Skeleton | None = None,
    num_folds: int = 5,
    variance_fraction: float = 0.95,
    resample_frames: int = RESAMPLE_FRAMES,
) -> tuple[RecognitionModel, RecognitionReport]:
    """Train the attacker (or utility probe) and report test balanced accuracy.

    The anonymization arm runs first over the whole corpus (adaptive
    adversary), then the split, then featurization; normalization ranges and
    the PCA basis are fitted on training rows only. gamma_k candidates are
    gamma_scales / D with D the retained PCA dimension.
    """
    if task not in TASKS:
        raise UsageError(f"train_recognizer: unknown task '{task}'")

    sequences, kept = anonymize_sequences(corpus, anon, fits, prior_model, skel)
    seq_ids = [corpus.seq_ids[i] for i in kept]
    subjects = [corpus.subject_ids[i] for i in kept]
    actions = [corpus.action_labels[i] for i in kept]
    class_labels = subjects if task == TASK_IDENTITY else actions

    kind = SPLIT_STRATIFIED if task == TASK_IDENTITY else SPLIT_DISJOINT
    plan = build_split_plan(kind, seq_ids, class_labels, subjects, split_seed)

    feats = np.stack([featurize(s, resample_frames) for s in sequences])
    tr = plan.train_indices
    te = plan.test_indices
    x_tr_raw, x_te_raw = feats[tr], feats[te]
    y_tr = [class_labels[i] for i in tr]
    y_te = [class_labels[i] for i in te]

    ranges = minmax_fit(x_tr_raw)
    x_tr_mm = minmax_apply(ranges, x_tr_raw)
    pca = pca_fit(x_tr_mm, variance_fraction=variance_fraction)
    x_tr = pca_transform(pca, x_tr_mm)
    x_te = pca_transform(pca, minmax_apply(ranges, x_te_raw))
    d = x_tr.shape[1]
    gamma_grid = [s / d for s in gamma_scales]

    warn_list = []
    min_count = min(y_tr.count(cl) for cl in set(y_tr))
    folds_used = min(num_folds, min_count)
    if folds_used < num_folds:
        folds_used = max(folds_used, 2)
        warn_list.append(
            f"reduced CV folds to {folds_used}: smallest train class has {min_count} samples"
        )
    fold_of = _stratified_folds(y_tr, folds_used, split_seed + 1)

    cv_table = []
    best = None
    for c in c_grid:
        for gk in gamma_grid:
            scores = []
            for f in range(folds_used):
                va = fold_of == f
                if not va.any() or va.all():
                    continue
                model_f = svm_train(x_tr[~va], [y for y, v in zip(y_tr, va) if not v], c, gk)
                preds = model_f.predict(x_tr[va])
                scores.append(balanced_accuracy(preds, [y for y, v in zip(y_tr, va) if v]))
            mean = float(np.mean(scores)) if scores else 0.0
            cv_table.append({"c": c, "gamma_k": gk, "fold_scores": scores, "mean": mean})
            if best is None or mean > best[0]:
                best = (mean, c, gk)

    _, best_c, best_gk = best
    svm = svm_train(x_tr, y_tr, best_c, best_gk)
    if svm.hit_iteration_cap:
        warn_list.append("SMO iteration cap hit during final refit")

    preds = svm.predict(x_te)
    acc = balanced_accuracy(preds, y_te)
    classes = sorted(set(class_labels))
    cindex = {cl: k for k, cl in enumerate(classes)}
    confusion = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for p, yy in zip(preds, y_te):
        confusion[cindex[yy], cindex[p]] += 1

    anon_dict = None
    if anon is not None:
        anon_dict = anon.to_dict()
        anon_dict["arm"] = "latent" if isinstance(anon, AnonymizationConfig) else "direct"

    model = RecognitionModel(
        task=task,
        ranges=ranges,
        pca=pca,
        svm=svm,
        labels=tuple(classes),
        split=plan,
        warnings=tuple(warn_list),
    )
    report = RecognitionReport(
        task=task,
        split_kind=kind,
        split_seed=split_seed,
        labels=tuple(classes),
        num_folds=folds_used,
        cv_table=cv_table,
        chosen_c=best_c,
        chosen_gamma_k=best_gk,
        test_balanced_accuracy=acc,
        confusion=confusion,
        anonymization=anon_dict,
        num_train=len(tr),
        num_test=len(te),
        warnings=tuple(warn_list),
    )
    return model, report
