"""Mini-batch gradient descent for the GCN head and the linear baseline."""

import logging
from collections.abc import Callable, Mapping

import numpy as np

from ddgcn.config import DdgcnModel, TrainConfig
from ddgcn.data import Dataset, label_matrix
from ddgcn.errors import NonFiniteError, ShapeError, TrainingDivergedError
from ddgcn.graphbuild import PropagationMatrix
from ddgcn.metrics import mean_average_precision
from ddgcn.model.baseline import LinearBaseline, init_linear_baseline
from ddgcn.model.gcn import GcnHead, GcnModel, GradientSet, backward

Params = dict[str, np.ndarray]
GradFn = Callable[[Params, np.ndarray, np.ndarray], tuple[float, GradientSet]]
ValFn = Callable[[Params], float]


class TrainHistory(DdgcnModel):
    """Per-epoch mean training loss and, when validating, per-epoch mAP."""

    losses: list[float] = []
    val_map: list[float] = []


def _fit(
    params: Mapping[str, np.ndarray],
    grad_fn: GradFn,
    features: np.ndarray,
    targets: np.ndarray,
    tc: TrainConfig,
    val_fn: ValFn | None = None,
) -> tuple[Params, TrainHistory]:
    """Shared loop: seeded shuffles, one update per mini-batch."""
    params = {name: value.copy() for name, value in params.items()}
    history = TrainHistory()
    rng = np.random.default_rng(tc.seed)
    count = features.shape[0]

    for epoch in range(tc.epochs):
        lr = tc.lr_schedule.rate(tc.learning_rate, epoch)
        order = rng.permutation(count)
        total = 0.0
        for start in range(0, count, tc.batch_size):
            batch = order[start : start + tc.batch_size]
            try:
                loss, grads = grad_fn(params, features[batch], targets[batch])
            except NonFiniteError as err:
                raise TrainingDivergedError(epoch + 1, float("nan")) from err
            if not np.isfinite(loss):
                raise TrainingDivergedError(epoch + 1, loss)
            total += loss * len(batch)
            for name, value in params.items():
                step = grads[name]
                if tc.weight_decay:
                    step = step + tc.weight_decay * value
                value -= lr * step

        mean_loss = total / count
        if not all(np.isfinite(value).all() for value in params.values()):
            raise TrainingDivergedError(epoch + 1, float("nan"))
        history.losses.append(mean_loss)
        message = f"epoch {epoch + 1}/{tc.epochs} loss={mean_loss:.6f} lr={lr:g}"
        if val_fn is not None:
            history.val_map.append(val_fn(params))
            message += f" val_map={history.val_map[-1]:.4f}"
        logging.info(message)
    return params, history


def _check_dims(dataset: Dataset, size: int, d_feat: int) -> None:
    if len(dataset.vocab) != size:
        raise ShapeError(f"dataset has {len(dataset.vocab)} labels, model has {size}")
    if dataset.d_feat != d_feat:
        raise ShapeError(f"dataset has {dataset.d_feat} features, model expects {d_feat}")


def train(
    dataset: Dataset,
    P1: PropagationMatrix,
    P2: PropagationMatrix,
    model: GcnModel,
    tc: TrainConfig,
    val_dataset: Dataset | None = None,
) -> tuple[GcnModel, TrainHistory]:
    """Train the GCN head end-to-end; ``model`` itself is left untouched.

    Raises:
        ShapeError: If dataset and model dimensions disagree.
        TrainingDivergedError: Naming the epoch where the loss stopped being finite.
    """
    _check_dims(dataset, model.size, model.config.d_feat)
    targets = label_matrix(dataset).astype(np.float64)

    def grad_fn(params: Params, x: np.ndarray, y: np.ndarray) -> tuple[float, GradientSet]:
        return backward(model.view(params), P1, P2, x, y)

    val_fn = None
    if val_dataset is not None:
        _check_dims(val_dataset, model.size, model.config.d_feat)
        val_targets = label_matrix(val_dataset)

        def val_fn(params: Params) -> float:
            head = GcnHead(model.view(params), P1, P2)
            return mean_average_precision(head.scores(val_dataset.features()), val_targets)

    logging.info(
        f"Training GCN head on {len(dataset)} samples for {tc.epochs} epochs "
        f"(lr={tc.learning_rate}, batch={tc.batch_size}, seed={tc.seed})"
    )
    params, history = _fit(model.params(), grad_fn, dataset.features(), targets, tc, val_fn)
    return model.with_params(params), history


def fit_linear_baseline(
    dataset: Dataset,
    tc: TrainConfig,
    baseline: LinearBaseline | None = None,
    val_dataset: Dataset | None = None,
) -> tuple[LinearBaseline, TrainHistory]:
    """Train the C x d_feat linear head; returns the model and its history."""
    if baseline is None:
        baseline = init_linear_baseline(len(dataset.vocab), dataset.d_feat, tc.seed)
    _check_dims(dataset, baseline.size, baseline.W.shape[1])
    targets = label_matrix(dataset).astype(np.float64)

    def grad_fn(params: Params, x: np.ndarray, y: np.ndarray) -> tuple[float, GradientSet]:
        return baseline.view(params).loss_and_grads(x, y)

    val_fn = None
    if val_dataset is not None:
        val_targets = label_matrix(val_dataset)

        def val_fn(params: Params) -> float:
            scores = baseline.view(params).scores(val_dataset.features())
            return mean_average_precision(scores, val_targets)

    logging.info(f"Training linear baseline on {len(dataset)} samples for {tc.epochs} epochs")
    params, history = _fit(baseline.params(), grad_fn, dataset.features(), targets, tc, val_fn)
    return baseline.with_params(params), history


def train_linear_baseline(
    dataset: Dataset, tc: TrainConfig, baseline: LinearBaseline | None = None
) -> LinearBaseline:
    return fit_linear_baseline(dataset, tc, baseline)[0]
