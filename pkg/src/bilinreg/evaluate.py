"""Prediction, accuracy and validation-set selection of alpha."""

import time
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigError, DataError, NumericError, ShapeError
from .model import (
    BilinearModel,
    BilinearSoftmaxModel,
    LinearModel,
    LinearSoftmaxModel,
    batch_scores,
)
from .objective import BinaryBatch

DEFAULT_ALPHAS = (0.0, 1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0)

BINARY_MODELS = (LinearModel, BilinearModel)
SOFTMAX_MODELS = (LinearSoftmaxModel, BilinearSoftmaxModel)


@dataclass(frozen=True)
class CvGrid:
    alphas: tuple = DEFAULT_ALPHAS

    def __post_init__(self):
        alphas = tuple(float(a) for a in self.alphas)
        if not alphas:
            raise ConfigError("alpha grid is empty")
        if any(a < 0 or not np.isfinite(a) for a in alphas):
            raise ConfigError(f"alpha grid has negative or non-finite values: {alphas}")
        if any(b <= a for a, b in zip(alphas, alphas[1:])):
            raise ConfigError(f"alpha grid must be strictly increasing: {alphas}")
        object.__setattr__(self, "alphas", alphas)


def _stack(X):
    X = np.asarray(X, dtype=np.float64)
    return X[None] if X.ndim == 2 else X


def predict_binary(model, X):
    """Class 1 iff the score is >= 0. Accepts one image or a (T, M, N) stack."""
    if not isinstance(model, BINARY_MODELS):
        raise ConfigError(f"{type(model).__name__} is not a binary model")
    single = np.ndim(X) == 2
    pred = (batch_scores(model, _stack(X)) >= 0).astype(np.int64)
    return int(pred[0]) if single else pred


def predict_multiclass(model, X):
    """Index of the largest score; ties resolve to the lowest class index."""
    if not isinstance(model, SOFTMAX_MODELS):
        raise ConfigError(f"{type(model).__name__} is not a softmax model")
    single = np.ndim(X) == 2
    pred = np.argmax(batch_scores(model, _stack(X)), axis=1)
    return int(pred[0]) if single else pred


def predict(model, X):
    if isinstance(model, BINARY_MODELS):
        return predict_binary(model, X)
    return predict_multiclass(model, X)


def _truth(batch):
    if isinstance(batch, BinaryBatch):
        return batch.labels.astype(np.int64)
    return batch.labels


def accuracy(model, batch):
    """Fraction of correctly classified samples (multiply by 100 for percent)."""
    if batch is None or len(batch) == 0:
        raise ShapeError("accuracy of an empty batch is undefined")
    correct = int(np.sum(predict(model, batch.inputs) == _truth(batch)))
    return correct / len(batch)


def per_class_counts(model, batch):
    """``{class: (correct, total)}`` over the batch."""
    pred = predict(model, batch.inputs)
    truth = _truth(batch)
    return {int(k): (int(np.sum((pred == k) & (truth == k))), int(np.sum(truth == k))) for k in np.unique(truth)}


def parameter_count(model):
    if isinstance(model, LinearModel):
        M, N = model.shape
        return M * N
    if isinstance(model, BilinearModel):
        M, N = model.shape
        return model.rank * (M + N)
    if isinstance(model, LinearSoftmaxModel):
        M, N = model.shape
        return model.n_classes * M * N
    if isinstance(model, BilinearSoftmaxModel):
        M, N = model.shape
        return model.n_classes * model.rank * (M + N)
    raise TypeError(f"unsupported model type {type(model).__name__}")


@dataclass
class Selection:
    alpha: float
    model: object
    val_accuracy: float
    scores: dict = field(default_factory=dict)  # alpha -> validation accuracy


def select_alpha(trainer, train, val, grid=CvGrid(), cfg=None):
    """Train once per alpha and keep the best validation accuracy.

    ``trainer(train, cfg)`` must return ``(model, report)``; ``cfg`` is a
    TrainConfig whose alpha is replaced per grid point (same seed for all).
    Ties go to the smallest alpha.
    """
    if cfg is None:
        from .optim import TrainConfig

        cfg = TrainConfig()
    best = None
    scores = {}
    for alpha in grid.alphas:
        try:
            model, _ = trainer(train, cfg.with_alpha(alpha))
        except (ConfigError, DataError, NumericError) as exc:
            raise type(exc)(f"alpha={alpha}: {exc}") from exc
        acc = accuracy(model, val)
        scores[alpha] = acc
        if best is None or acc > best.val_accuracy:
            best = Selection(alpha, model, acc)
    best.scores = scores
    return best


CSV_HEADER = (
    "experiment,model,L,T,alpha,seed,train_accuracy,val_accuracy,test_accuracy,test_count,parameters,wall_time"
)


@dataclass
class EvalReport:
    experiment: str
    model_kind: str
    rank: int  # 0 for linear models
    train_size: int
    alpha: float
    seed: int
    train_accuracy: float
    val_accuracy: float
    test_accuracy: float
    test_count: int
    parameters: int
    wall_time: float = 0.0
    per_class: dict = field(default_factory=dict)  # test set, {class: (correct, total)}

    def csv_row(self):
        return (
            f"{self.experiment},{self.model_kind},{self.rank},{self.train_size},{self.alpha!r},{self.seed},"
            f"{self.train_accuracy:.6f},{self.val_accuracy:.6f},{self.test_accuracy:.6f},"
            f"{self.test_count},{self.parameters},{self.wall_time:.3f}"
        )


def evaluate(experiment, model_kind, model, selection_alpha, seed, train, val, test, started=None):
    wall = time.perf_counter() - started if started is not None else 0.0
    return EvalReport(
        experiment=experiment,
        model_kind=model_kind,
        rank=getattr(model, "rank", 0),
        train_size=len(train),
        alpha=selection_alpha,
        seed=seed,
        train_accuracy=accuracy(model, train),
        val_accuracy=accuracy(model, val) if val is not None else float("nan"),
        test_accuracy=accuracy(model, test) if test is not None else float("nan"),
        test_count=len(test) if test is not None else 0,
        parameters=parameter_count(model),
        wall_time=wall,
        per_class=per_class_counts(model, test) if test is not None else {},
    )
