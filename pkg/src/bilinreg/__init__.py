"""Bilinear logistic and softmax regression for image classification."""

from .model import (
    BilinearModel,
    BilinearSoftmaxModel,
    LinearModel,
    LinearSoftmaxModel,
    decompose_w,
    load_model,
    reconstruct_w,
    save_model,
)
from .objective import BinaryBatch, MulticlassBatch, ObjectiveConfig, RegularizerKind
from .optim import LineSearchParams, TrainConfig, train_blr, train_bsr, train_llr, train_lsr

__version__ = "0.1.0"
