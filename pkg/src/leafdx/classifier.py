"""Kernel SVMs trained with SMO and combined one-vs-one.

Binary problems are solved in two phases. A seeded simplified-SMO sweep
(random second multiplier) does the bulk of the work; a maximal-violating-pair
phase then drives the KKT gap below ``tol`` so the returned solution is
certified rather than merely "stopped changing".
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from decimal import ROUND_DOWN, Decimal
from itertools import combinations
from pathlib import Path

import numpy as np

from .errors import ConfigError, LeafDxError, ModelFormatError

MODEL_VERSION = "leafdx-model/1"

LINEAR = "linear"
RBF = "rbf"
POLYNOMIAL = "polynomial"
QUADRATIC = "quadratic"
KERNELS = (LINEAR, RBF, POLYNOMIAL, QUADRATIC)

DISEASES = ("Anthracnose", "Blight", "Canker", "LeafSpot")


@dataclass(frozen=True)
class KernelSpec:
    kind: str = LINEAR
    rbf_gamma: float | None = None  # None: pick from data at training time
    poly_degree: int = 3
    poly_coef0: float = 1.0

    def __post_init__(self):
        if self.kind not in KERNELS:
            raise ConfigError(f"unknown kernel {self.kind!r}; choose from {KERNELS}")
        if self.rbf_gamma is not None and not self.rbf_gamma > 0:
            raise ConfigError("rbf_gamma must be > 0")
        if self.poly_degree < 1:
            raise ConfigError("poly_degree must be >= 1")

    @property
    def degree(self) -> int:
        return 2 if self.kind == QUADRATIC else self.poly_degree

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "rbf_gamma": self.rbf_gamma,
            "poly_degree": self.poly_degree,
            "poly_coef0": self.poly_coef0,
        }


def kernel_matrix(k: KernelSpec, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Gram matrix between the rows of ``x`` and the rows of ``y``."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.atleast_2d(np.asarray(y, dtype=np.float64))
    if x.shape[1] != y.shape[1]:
        raise LeafDxError(f"dimension mismatch: {x.shape[1]} vs {y.shape[1]}")
    if k.kind == RBF:
        if k.rbf_gamma is None:
            raise ConfigError("RBF kernel gamma has not been resolved")
        d2 = (x * x).sum(1)[:, None] + (y * y).sum(1)[None, :] - 2.0 * x @ y.T
        return np.exp(-k.rbf_gamma * np.maximum(d2, 0.0))
    dot = x @ y.T
    if k.kind == LINEAR:
        return dot
    return (dot + k.poly_coef0) ** k.degree


def kernel_eval(k: KernelSpec, x, y) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise LeafDxError(f"dimension mismatch: {x.shape} vs {y.shape}")
    if k.kind == RBF:
        diff = x - y
        return float(np.exp(-k.rbf_gamma * diff @ diff))
    return float(kernel_matrix(k, x[None, :], y[None, :])[0, 0])


# --------------------------------------------------------------------------
# data handling
# --------------------------------------------------------------------------

@dataclass
class Dataset:
    features: np.ndarray
    labels: list[str]

    def __post_init__(self):
        self.features = np.atleast_2d(np.asarray(self.features, dtype=np.float64))
        self.labels = [str(lab) for lab in self.labels]
        if len(self.labels) != len(self.features):
            raise LeafDxError("feature rows and labels differ in length")

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def label_set(self) -> list[str]:
        return sorted(set(self.labels))

    def subset(self, keep) -> "Dataset":
        idx = np.flatnonzero(np.asarray(keep))
        return Dataset(self.features[idx], [self.labels[i] for i in idx])


@dataclass(frozen=True)
class Scaler:
    mean: np.ndarray
    std: np.ndarray

    def transform(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=np.float64) - self.mean) / self.std


def standardize_fit(train: Dataset) -> Scaler:
    """Per-feature mean and population std; near-constant features get std 1."""
    if len(train) == 0:
        raise LeafDxError("empty dataset")
    x = train.features
    std = x.std(axis=0)
    std = np.where(std < 1e-12, 1.0, std)
    return Scaler(x.mean(axis=0), std)


def default_rbf_gamma(x: np.ndarray) -> float:
    """``1 / (d * median pairwise squared distance)``, clamped to [1e-4, 1e2]."""
    n, d = x.shape
    if n < 2:
        return 1.0
    diff = x[:, None, :] - x[None, :, :]
    d2 = np.einsum("ijk,ijk->ij", diff, diff)[np.triu_indices(n, 1)]
    med = float(np.median(d2))
    if med <= 0:
        return 1e2
    return float(np.clip(1.0 / (d * med), 1e-4, 1e2))


# --------------------------------------------------------------------------
# binary SMO
# --------------------------------------------------------------------------

@dataclass
class SmoSolution:
    alpha: np.ndarray   # unsigned multipliers, one per training sample
    bias: float
    gap: float          # final maximal KKT violation gap
    iterations: int


def _bias_and_gap(alpha, y, grad_f, c) -> tuple[float, float]:
    # v_t = y_t - sum_s alpha_s y_s K_ts; at optimum the bias separates the
    # "up" set (can raise y*alpha) from the "low" set.
    v = y - grad_f
    up = ((y > 0) & (alpha < c)) | ((y < 0) & (alpha > 0))
    low = ((y < 0) & (alpha < c)) | ((y > 0) & (alpha > 0))
    m_up = v[up].max() if up.any() else -np.inf
    m_low = v[low].min() if low.any() else np.inf
    free = (alpha > 0) & (alpha < c)
    if free.any():
        b = float(v[free].mean())
    else:
        b = float((m_up + m_low) / 2)
    return b, float(m_up - m_low)


def smo_solve(
    gram: np.ndarray,
    y: np.ndarray,
    c: float = 10.0,
    tol: float = 1e-3,
    max_passes: int = 200,
    seed: int = 0,
    max_iter: int = 1_000_000,
) -> SmoSolution:
    """Solve the soft-margin SVM dual on a precomputed Gram matrix.

    ``y`` holds +1/-1 labels. On return every sample satisfies the KKT
    conditions to within ``tol`` (in units of ``y * f(x)``).
    """
    y = np.asarray(y, dtype=np.float64)
    n = len(y)
    if n == 0:
        raise LeafDxError("empty training set")
    if not (np.any(y > 0) and np.any(y < 0)):
        raise LeafDxError("training set holds a single class")
    if not c > 0:
        raise ConfigError("C must be > 0")

    rng = np.random.default_rng(seed)
    alpha = np.zeros(n)
    grad_f = np.zeros(n)  # sum_s alpha_s y_s K[t, s]
    b = 0.0
    iterations = 0

    # phase 1: simplified SMO, random partner
    for _ in range(max_passes):
        changed = 0
        for i in range(n):
            e_i = grad_f[i] + b - y[i]
            r_i = y[i] * e_i
            if not ((r_i < -tol and alpha[i] < c) or (r_i > tol and alpha[i] > 0)):
                continue
            j = int(rng.integers(0, n - 1))
            j += j >= i
            e_j = grad_f[j] + b - y[j]
            ai, aj = alpha[i], alpha[j]
            if y[i] != y[j]:
                lo, hi = max(0.0, aj - ai), min(c, c + aj - ai)
            else:
                lo, hi = max(0.0, ai + aj - c), min(c, ai + aj)
            if lo >= hi:
                continue
            eta = 2.0 * gram[i, j] - gram[i, i] - gram[j, j]
            if eta >= 0:
                continue
            new_aj = min(hi, max(lo, aj - y[j] * (e_i - e_j) / eta))
            if abs(new_aj - aj) < 1e-8:
                continue
            new_ai = ai + y[i] * y[j] * (aj - new_aj)
            new_ai = min(c, max(0.0, new_ai))
            alpha[i], alpha[j] = new_ai, new_aj
            grad_f += (new_ai - ai) * y[i] * gram[:, i] + (new_aj - aj) * y[j] * gram[:, j]
            b1 = b - e_i - y[i] * (new_ai - ai) * gram[i, i] - y[j] * (new_aj - aj) * gram[i, j]
            b2 = b - e_j - y[i] * (new_ai - ai) * gram[i, j] - y[j] * (new_aj - aj) * gram[j, j]
            if 0 < new_ai < c:
                b = b1
            elif 0 < new_aj < c:
                b = b2
            else:
                b = (b1 + b2) / 2
            changed += 1
            iterations += 1
        if changed == 0:
            break

    # phase 2: maximal violating pair until the KKT gap closes
    up_mask_pos, low_mask_pos = y > 0, y < 0
    while iterations < max_iter:
        v = y - grad_f
        up = (up_mask_pos & (alpha < c)) | (low_mask_pos & (alpha > 0))
        low = (low_mask_pos & (alpha < c)) | (up_mask_pos & (alpha > 0))
        i = int(np.argmax(np.where(up, v, -np.inf)))
        j = int(np.argmin(np.where(low, v, np.inf)))
        if v[i] - v[j] <= tol:
            break
        eta = max(gram[i, i] + gram[j, j] - 2.0 * gram[i, j], 1e-12)
        step = (v[i] - v[j]) / eta
        cap_i = c - alpha[i] if y[i] > 0 else alpha[i]
        cap_j = alpha[j] if y[j] > 0 else c - alpha[j]
        step = min(step, cap_i, cap_j)
        if step == cap_i:
            alpha[i] = c if y[i] > 0 else 0.0
        else:
            alpha[i] += y[i] * step
        if step == cap_j:
            alpha[j] = 0.0 if y[j] > 0 else c
        else:
            alpha[j] -= y[j] * step
        grad_f += step * (gram[:, i] - gram[:, j])
        iterations += 1

    b, gap = _bias_and_gap(alpha, y, grad_f, c)
    return SmoSolution(alpha, b, gap, iterations)


@dataclass
class BinarySvm:
    """Two-class SVM; ``class_pair[0]`` is the positive class."""

    support_vectors: np.ndarray
    alphas: np.ndarray  # signed: alpha_i * y_i
    bias: float
    kernel: KernelSpec
    class_pair: tuple[str, str]

    def decision(self, x: np.ndarray) -> np.ndarray:
        return kernel_matrix(self.kernel, x, self.support_vectors) @ self.alphas + self.bias

    def predict_label(self, x: np.ndarray) -> list[str]:
        return [self.class_pair[0] if f >= 0 else self.class_pair[1] for f in self.decision(x)]


def smo_train(
    x: np.ndarray,
    y: np.ndarray,
    kernel: KernelSpec = KernelSpec(),
    c: float = 10.0,
    tol: float = 1e-3,
    max_passes: int = 200,
    seed: int = 0,
    class_pair: tuple[str, str] = ("+1", "-1"),
) -> BinarySvm:
    """Train a binary SVM on rows ``x`` with +1/-1 targets ``y``."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64)
    if len(x) == 0:
        raise LeafDxError("empty training set")
    if kernel.kind == RBF and kernel.rbf_gamma is None:
        kernel = KernelSpec(RBF, default_rbf_gamma(x), kernel.poly_degree, kernel.poly_coef0)
    sol = smo_solve(kernel_matrix(kernel, x, x), y, c, tol, max_passes, seed)
    sv = sol.alpha > 0
    if not sv.any():
        raise LeafDxError("SMO produced no support vectors")
    return BinarySvm(x[sv].copy(), (sol.alpha * y)[sv], sol.bias, kernel, class_pair)


# --------------------------------------------------------------------------
# one-vs-one
# --------------------------------------------------------------------------

@dataclass
class MulticlassModel:
    binaries: list[BinarySvm]
    labels: list[str]
    scaler: Scaler
    kernel: KernelSpec
    c: float = 10.0
    version: str = MODEL_VERSION

    @property
    def n_features(self) -> int:
        return len(self.scaler.mean)


@dataclass
class Prediction:
    label: str
    votes: dict[str, int]
    margins: dict[str, float] = field(default_factory=dict)


def train_multiclass(
    train: Dataset,
    kernel: KernelSpec = KernelSpec(),
    c: float = 10.0,
    tol: float = 1e-3,
    seed: int = 0,
    max_passes: int = 200,
) -> MulticlassModel:
    """Standardize features, then fit one SVM per unordered label pair."""
    labels = train.label_set
    if len(labels) < 2:
        raise LeafDxError(f"need at least 2 labels to train, got {labels}")
    scaler = standardize_fit(train)
    x = scaler.transform(train.features)
    if kernel.kind == RBF and kernel.rbf_gamma is None:
        kernel = KernelSpec(RBF, default_rbf_gamma(x), kernel.poly_degree, kernel.poly_coef0)
    names = np.array(train.labels)
    binaries = []
    for pair_index, (pos, neg) in enumerate(combinations(labels, 2)):
        keep = (names == pos) | (names == neg)
        y = np.where(names[keep] == pos, 1.0, -1.0)
        pair_seed = int(np.random.SeedSequence([seed, pair_index]).generate_state(1)[0])
        binaries.append(smo_train(x[keep], y, kernel, c, tol, max_passes, pair_seed, (pos, neg)))
    return MulticlassModel(binaries, labels, scaler, kernel, c)


def predict(model: MulticlassModel, x) -> Prediction:
    """One-vs-one vote. Ties go to the larger summed |decision|, then label order."""
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    if x.shape[1] != model.n_features:
        raise LeafDxError(f"expected {model.n_features} features, got {x.shape[1]}")
    z = model.scaler.transform(x)
    votes = {lab: 0 for lab in model.labels}
    margins = {lab: 0.0 for lab in model.labels}
    for svm in model.binaries:
        f = float(svm.decision(z)[0])
        winner = svm.class_pair[0] if f >= 0 else svm.class_pair[1]
        votes[winner] += 1
        margins[winner] += abs(f)
    best = max(model.labels, key=lambda lab: (votes[lab], margins[lab], -model.labels.index(lab)))
    return Prediction(best, votes, margins)


# --------------------------------------------------------------------------
# evaluation
# --------------------------------------------------------------------------

def accuracy_percent(correct: int, total: int) -> Decimal:
    """``correct / total * 100`` truncated to two decimals (54/64 -> 84.37)."""
    if total <= 0:
        raise LeafDxError("accuracy of an empty set is undefined")
    return (Decimal(correct) * 100 / Decimal(total)).quantize(Decimal("0.01"), rounding=ROUND_DOWN)


@dataclass
class AccuracyReport:
    labels: list[str]
    counts: dict[str, int]
    correct: dict[str, int]
    confusion: list[list[int]]  # rows: true label, columns: predicted label
    predictions: list[str]

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    @property
    def total_correct(self) -> int:
        return sum(self.correct.values())

    def label_accuracy(self, label: str) -> Decimal:
        return accuracy_percent(self.correct[label], self.counts[label])

    @property
    def overall(self) -> Decimal:
        return accuracy_percent(self.total_correct, self.total)

    def to_dict(self) -> dict:
        rows = []
        for lab in self.labels:
            if self.counts[lab] == 0:
                continue
            rows.append(
                {
                    "label": lab,
                    "count": self.counts[lab],
                    "correct": self.correct[lab],
                    "incorrect": self.counts[lab] - self.correct[lab],
                    "accuracy": f"{self.label_accuracy(lab)}",
                }
            )
        return {
            "rows": rows,
            "overall": {"count": self.total, "correct": self.total_correct, "accuracy": f"{self.overall}"},
            "labels": self.labels,
            "confusion": self.confusion,
        }

    def table(self) -> str:
        """Plain-text table with count / correct / incorrect / accuracy columns."""
        lines = [f"{'Label':<14}{'Count':>7}{'Correct':>9}{'Incorrect':>11}{'Accuracy':>11}"]
        for row in self.to_dict()["rows"]:
            lines.append(
                f"{row['label']:<14}{row['count']:>7}{row['correct']:>9}{row['incorrect']:>11}{row['accuracy'] + '%':>11}"
            )
        lines.append(
            f"{'Overall':<14}{self.total:>7}{self.total_correct:>9}{self.total - self.total_correct:>11}{str(self.overall) + '%':>11}"
        )
        return "\n".join(lines)


def accuracy_from_predictions(true: list[str], predicted: list[str], labels: list[str] | None = None) -> AccuracyReport:
    if not true:
        raise LeafDxError("empty evaluation set")
    if len(true) != len(predicted):
        raise LeafDxError("truth and prediction lists differ in length")
    labels = list(labels) if labels is not None else sorted(set(true) | set(predicted))
    index = {lab: i for i, lab in enumerate(labels)}
    confusion = [[0] * len(labels) for _ in labels]
    counts = {lab: 0 for lab in labels}
    correct = {lab: 0 for lab in labels}
    for t, p in zip(true, predicted):
        if t not in index or p not in index:
            raise LeafDxError(f"label outside the label set: {t!r} / {p!r}")
        confusion[index[t]][index[p]] += 1
        counts[t] += 1
        correct[t] += t == p
    return AccuracyReport(labels, counts, correct, confusion, list(predicted))


def evaluate_accuracy(model: MulticlassModel, data: Dataset) -> AccuracyReport:
    if len(data) == 0:
        raise LeafDxError("empty evaluation set")
    predicted = [predict(model, row).label for row in data.features]
    labels = sorted(set(model.labels) | set(data.labels))
    return accuracy_from_predictions(data.labels, predicted, labels)


# --------------------------------------------------------------------------
# persistence
# --------------------------------------------------------------------------

def model_to_dict(model: MulticlassModel) -> dict:
    return {
        "version": model.version,
        "labels": model.labels,
        "kernel": model.kernel.to_dict(),
        "c": model.c,
        "scaler": {"mean": model.scaler.mean.tolist(), "std": model.scaler.std.tolist()},
        "binaries": [
            {
                "class_pair": list(svm.class_pair),
                "bias": svm.bias,
                "alphas": svm.alphas.tolist(),
                "support_vectors": svm.support_vectors.tolist(),
            }
            for svm in model.binaries
        ],
    }


def model_from_dict(doc: dict) -> MulticlassModel:
    if not isinstance(doc, dict) or "version" not in doc:
        raise ModelFormatError("malformed model: missing version")
    if doc["version"] != MODEL_VERSION:
        raise ModelFormatError(f"unsupported model version {doc['version']!r}")
    try:
        kernel = KernelSpec(**doc["kernel"])
        binaries = [
            BinarySvm(
                np.array(b["support_vectors"], dtype=np.float64).reshape(len(b["alphas"]), -1),
                np.array(b["alphas"], dtype=np.float64),
                float(b["bias"]),
                kernel,
                tuple(b["class_pair"]),
            )
            for b in doc["binaries"]
        ]
        scaler = Scaler(np.array(doc["scaler"]["mean"], dtype=np.float64), np.array(doc["scaler"]["std"], dtype=np.float64))
        model = MulticlassModel(binaries, list(doc["labels"]), scaler, kernel, float(doc["c"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"malformed model: {exc}") from exc
    n = len(model.labels)
    if len(binaries) != n * (n - 1) // 2:
        raise ModelFormatError("malformed model: wrong number of binary classifiers")
    return model


def save_model(model: MulticlassModel, path: str | os.PathLike) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=1) + "\n")


def load_model(path: str | os.PathLike) -> MulticlassModel:
    path = Path(path)
    if not path.is_file():
        raise ModelFormatError(f"model file not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ModelFormatError(f"malformed model: {exc}") from exc
    return model_from_dict(doc)
