"""Cross-entropy objectives, regularizers and their analytic gradients.

Rank and class indices are 0-based. Data terms are evaluated from scores
through softplus / log-sum-exp, so finite scores never hit ``log(0)``.
Sums over samples run in a fixed order, so results are reproducible.
"""

import enum
from dataclasses import dataclass

import numpy as np

from . import kernels
from .exceptions import ConfigError, ShapeError
from .model import (
    BilinearModel,
    BilinearSoftmaxModel,
    LinearModel,
    LinearSoftmaxModel,
    batch_scores,
    logistic,
    softmax,
)


class RegularizerKind(enum.Enum):
    SUM_SQUARES = "sum"
    PRODUCT_SQUARES = "product"
    FROBENIUS_OF_W = "frobenius"  # evaluate-only, no gradient

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            names = ", ".join(k.value for k in cls)
            raise ConfigError(f"unknown regularizer {value!r}; choose one of {names}") from None


TRAINABLE = (RegularizerKind.SUM_SQUARES, RegularizerKind.PRODUCT_SQUARES)


@dataclass(frozen=True)
class ObjectiveConfig:
    alpha: float = 0.0
    regularizer: RegularizerKind = RegularizerKind.SUM_SQUARES

    def __post_init__(self):
        object.__setattr__(self, "regularizer", RegularizerKind.parse(self.regularizer))
        if not (np.isfinite(self.alpha) and self.alpha >= 0):
            raise ConfigError(f"alpha must be a finite nonnegative number, got {self.alpha}")


@dataclass
class BinaryBatch:
    inputs: np.ndarray  # (T, M, N)
    labels: np.ndarray  # (T,) in {0, 1}

    def __post_init__(self):
        self.inputs = np.ascontiguousarray(self.inputs, dtype=np.float64)
        self.labels = np.asarray(self.labels)
        if self.inputs.ndim != 3 or self.inputs.shape[0] < 1:
            raise ShapeError(f"inputs must have shape (T, M, N) with T >= 1, got {self.inputs.shape}")
        if self.labels.shape != (self.inputs.shape[0],):
            raise ShapeError(f"{self.labels.shape[0] if self.labels.ndim else 0} labels for {self.inputs.shape[0]} inputs")
        if not np.all((self.labels == 0) | (self.labels == 1)):
            raise ConfigError("binary labels must be 0 or 1")
        self.labels = self.labels.astype(np.float64)

    def __len__(self):
        return self.inputs.shape[0]

    @property
    def image_shape(self):
        return self.inputs.shape[1:]


@dataclass
class MulticlassBatch:
    inputs: np.ndarray  # (T, M, N)
    onehot: np.ndarray  # (T, K)

    def __post_init__(self):
        self.inputs = np.ascontiguousarray(self.inputs, dtype=np.float64)
        self.onehot = np.asarray(self.onehot, dtype=np.float64)
        T = self.inputs.shape[0] if self.inputs.ndim == 3 else 0
        if self.inputs.ndim != 3 or T < 1:
            raise ShapeError(f"inputs must have shape (T, M, N) with T >= 1, got {self.inputs.shape}")
        if self.onehot.ndim != 2 or self.onehot.shape[0] != T:
            raise ShapeError(f"one-hot labels {self.onehot.shape} do not match {T} inputs")
        if not (np.all((self.onehot == 0) | (self.onehot == 1)) and np.all(self.onehot.sum(axis=1) == 1)):
            raise ConfigError("each one-hot row must contain exactly one 1")

    @classmethod
    def from_labels(cls, inputs, labels, n_classes):
        labels = np.asarray(labels, dtype=np.int64)
        if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
            raise ConfigError(f"labels must lie in [0, {n_classes})")
        onehot = np.zeros((labels.shape[0], n_classes))
        onehot[np.arange(labels.shape[0]), labels] = 1.0
        return cls(inputs, onehot)

    def __len__(self):
        return self.inputs.shape[0]

    @property
    def n_classes(self):
        return self.onehot.shape[1]

    @property
    def labels(self):
        return np.argmax(self.onehot, axis=1)

    @property
    def image_shape(self):
        return self.inputs.shape[1:]


# --- data terms ---------------------------------------------------------------


def binary_cross_entropy(y, c):
    y = np.asarray(y, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    if y.shape != c.shape or y.ndim != 1 or y.size == 0:
        raise ShapeError(f"probabilities {y.shape} and labels {c.shape} must be equal-length vectors")
    if np.any((y <= 0) | (y >= 1)):
        raise ConfigError("probabilities must lie strictly inside (0, 1)")
    return float(-np.mean(c * np.log(y) + (1 - c) * np.log1p(-y)))


def multiclass_cross_entropy(Y, C):
    Y = np.asarray(Y, dtype=np.float64)
    C = np.asarray(C, dtype=np.float64)
    if Y.shape != C.shape or Y.ndim != 2:
        raise ShapeError(f"probabilities {Y.shape} and one-hot labels {C.shape} must match")
    if np.any(np.abs(Y.sum(axis=1) - 1) > 1e-9):
        raise ConfigError("probability rows must sum to 1")
    picked = np.sum(Y * C, axis=1)
    if np.any(picked <= 0):
        raise ConfigError("a true-class probability is zero")
    return float(-np.mean(np.log(picked)))


def softplus(z):
    z = np.asarray(z, dtype=np.float64)
    return np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))


def binary_data_term(z, c):
    """Mean cross-entropy of labels ``c`` under logistic(z)."""
    return float(np.mean(softplus(z) - c * z))


def logsumexp(Z):
    top = np.max(Z, axis=-1)
    return top + np.log(np.sum(np.exp(Z - top[..., None]), axis=-1))


def multiclass_data_term(Z, C):
    return float(np.mean(logsumexp(Z) - np.sum(C * Z, axis=1)))


# --- regularizers -----------------------------------------------------------------


def column_regularizer(sq_a, sq_b, kind):
    """Sum or product regularizer from per-column squared norms."""
    if kind is RegularizerKind.SUM_SQUARES:
        return 0.5 * float(np.sum(sq_a + sq_b))
    if kind is RegularizerKind.PRODUCT_SQUARES:
        return 0.5 * float(np.sum(sq_a * sq_b))
    raise ConfigError(f"{kind.value} regularizer is evaluate-only")


def regularizer_value(m, kind=RegularizerKind.SUM_SQUARES):
    kind = RegularizerKind.parse(kind)
    if isinstance(m, BilinearSoftmaxModel):
        return float(sum(regularizer_value(m.class_model(k), kind) for k in range(m.n_classes)))
    if isinstance(m, (LinearModel, LinearSoftmaxModel)):
        return 0.5 * float(np.sum(m.W * m.W))
    if kind is RegularizerKind.FROBENIUS_OF_W:
        W = m.A @ m.B.T
        return 0.5 * float(np.sum(W * W))
    sq_a = np.sum(m.A * m.A, axis=0)
    sq_b = np.sum(m.B * m.B, axis=0)
    return column_regularizer(sq_a, sq_b, kind)


def regularizer_grad(vec, partner, kind):
    """Gradient of the regularizer w.r.t. one factor column ``vec``."""
    if kind is RegularizerKind.SUM_SQUARES:
        return vec
    if kind is RegularizerKind.PRODUCT_SQUARES:
        return float(partner @ partner) * vec
    raise ConfigError(f"{kind.value} regularizer is evaluate-only and has no gradient")


def _require_trainable(cfg):
    if cfg.regularizer not in TRAINABLE:
        raise ConfigError(f"{cfg.regularizer.value} regularizer cannot be used as a training objective")


def _check_rank_index(l, L):
    if not 0 <= l < L:
        raise IndexError(f"rank index {l} outside [0, {L})")


# --- binary models ----------------------------------------------------------------


def llr_objective(m, batch, cfg):
    """``V(W) + alpha * ||W||_F^2 / 2``; the regularizer kind is irrelevant for W."""
    z = batch_scores(m, batch.inputs)
    return binary_data_term(z, batch.labels) + cfg.alpha * regularizer_value(m)


def llr_grad(m, batch, cfg):
    z = batch_scores(m, batch.inputs)
    r = logistic(z) - batch.labels
    return kernels.weighted_sum(r, batch.inputs) / len(batch) + cfg.alpha * m.W


def blr_objective(m, batch, cfg):
    _require_trainable(cfg)
    z = batch_scores(m, batch.inputs)
    return binary_data_term(z, batch.labels) + cfg.alpha * regularizer_value(m, cfg.regularizer)


def _blr_residual(m, batch):
    return logistic(batch_scores(m, batch.inputs)) - batch.labels


def blr_grad_a(m, batch, cfg, l):
    _require_trainable(cfg)
    _check_rank_index(l, m.rank)
    r = _blr_residual(m, batch)
    P = kernels.right_project(batch.inputs, m.B[:, l : l + 1])[:, :, 0]
    return P.T @ r / len(batch) + cfg.alpha * regularizer_grad(m.A[:, l], m.B[:, l], cfg.regularizer)


def blr_grad_b(m, batch, cfg, l):
    _require_trainable(cfg)
    _check_rank_index(l, m.rank)
    r = _blr_residual(m, batch)
    Q = kernels.left_project(batch.inputs, m.A[:, l : l + 1])[:, :, 0]
    return Q.T @ r / len(batch) + cfg.alpha * regularizer_grad(m.B[:, l], m.A[:, l], cfg.regularizer)


# --- softmax models ---------------------------------------------------------------


def lsr_objective(m, batch, cfg):
    Z = batch_scores(m, batch.inputs)
    return multiclass_data_term(Z, batch.onehot) + cfg.alpha * regularizer_value(m)


def lsr_grad(m, batch, cfg):
    """Gradient for every class at once, shape (K, M, N)."""
    R = softmax(batch_scores(m, batch.inputs)) - batch.onehot
    T = len(batch)
    return np.stack(
        [kernels.weighted_sum(np.ascontiguousarray(R[:, k]), batch.inputs) / T for k in range(m.n_classes)]
    ) + cfg.alpha * m.W


def bsr_objective(m, batch, cfg):
    _require_trainable(cfg)
    Z = batch_scores(m, batch.inputs)
    return multiclass_data_term(Z, batch.onehot) + cfg.alpha * regularizer_value(m, cfg.regularizer)


def _bsr_residual(m, batch):
    return softmax(batch_scores(m, batch.inputs)) - batch.onehot


def _check_class_index(k, K):
    if not 0 <= k < K:
        raise IndexError(f"class index {k} outside [0, {K})")


def bsr_grad_a(m, batch, cfg, l, k):
    _require_trainable(cfg)
    _check_rank_index(l, m.rank)
    _check_class_index(k, m.n_classes)
    r = _bsr_residual(m, batch)[:, k]
    P = kernels.right_project(batch.inputs, m.B[k][:, l : l + 1])[:, :, 0]
    return P.T @ r / len(batch) + cfg.alpha * regularizer_grad(m.A[k][:, l], m.B[k][:, l], cfg.regularizer)


def bsr_grad_b(m, batch, cfg, l, k):
    _require_trainable(cfg)
    _check_rank_index(l, m.rank)
    _check_class_index(k, m.n_classes)
    r = _bsr_residual(m, batch)[:, k]
    Q = kernels.left_project(batch.inputs, m.A[k][:, l : l + 1])[:, :, 0]
    return Q.T @ r / len(batch) + cfg.alpha * regularizer_grad(m.B[k][:, l], m.A[k][:, l], cfg.regularizer)
