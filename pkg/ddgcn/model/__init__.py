"""Subpackage of ddgcn: model.

- ``gcn``: the GCN branch, prediction, loss and hand-derived gradients.
- ``baseline``: the linear head on frozen features.
- ``train``: the shared mini-batch gradient descent loop.
- ``checkpoint``: checkpoint, embedding and history files.
"""

from ddgcn.model.baseline import LinearBaseline, init_linear_baseline
from ddgcn.model.gcn import (
    GcnHead,
    GcnModel,
    GradientSet,
    backward,
    bce_loss,
    gcn_forward,
    init_model,
    predict,
)
from ddgcn.model.train import (
    TrainHistory,
    fit_linear_baseline,
    train,
    train_linear_baseline,
)

__all__ = [
    "GcnHead",
    "GcnModel",
    "GradientSet",
    "LinearBaseline",
    "TrainHistory",
    "backward",
    "bce_loss",
    "fit_linear_baseline",
    "gcn_forward",
    "init_linear_baseline",
    "init_model",
    "predict",
    "train",
    "train_linear_baseline",
]
