"""The GCN branch and its classifier head.

Forward pass::

    H1 = leaky(P1 @ Z @ W1)
    W~ = P2 @ H1 @ W2            (C x d_feat, one classifier row per label)
    scores = logistic(adapt(x) @ W~.T)

where ``adapt(x) = A x + b`` when the feature adapter is enabled. Gradients
are derived by hand and checked against finite differences in the tests.
"""

import copy
from collections.abc import Mapping
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import expit, logit

from ddgcn.config import GcnConfig
from ddgcn.errors import MetricDomainError, NonFiniteError, ShapeError
from ddgcn.graphbuild import PropagationMatrix

PARAM_ORDER = ("Z", "W1", "W2", "A", "b")


@dataclass(eq=False)
class GcnModel:
    """Label embeddings, two graph-convolution weights and the optional adapter."""

    Z: np.ndarray
    W1: np.ndarray
    W2: np.ndarray
    config: GcnConfig
    A: np.ndarray | None = None
    b: np.ndarray | None = None

    def __post_init__(self) -> None:
        cfg = self.config
        size = self.Z.shape[0]
        expected = {
            "Z": (size, cfg.d0),
            "W1": (cfg.d0, cfg.d1),
            "W2": (cfg.d1, cfg.d_feat),
        }
        if cfg.use_feature_adapter:
            expected.update({"A": (cfg.d_feat, cfg.d_feat), "b": (cfg.d_feat,)})
        elif self.A is not None or self.b is not None:
            raise ShapeError("adapter parameters given but the adapter is disabled")
        for name, shape in expected.items():
            value = getattr(self, name)
            if value is None or value.shape != shape:
                got = None if value is None else value.shape
                raise ShapeError(f"{name} must have shape {shape}, got {got}")
            if not np.isfinite(value).all():
                raise NonFiniteError(name)

    @property
    def size(self) -> int:
        return int(self.Z.shape[0])

    @property
    def adapter(self) -> tuple[np.ndarray, np.ndarray] | None:
        if self.A is None or self.b is None:
            return None
        return self.A, self.b

    def params(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in PARAM_ORDER if getattr(self, name) is not None}

    def with_params(self, params: Mapping[str, np.ndarray]) -> "GcnModel":
        return replace(self, **{name: np.array(val, dtype=np.float64) for name, val in params.items()})

    def view(self, params: Mapping[str, np.ndarray]) -> "GcnModel":
        """A model sharing the given arrays, neither copied nor re-validated."""
        bound = copy.copy(self)
        for name, value in params.items():
            setattr(bound, name, value)
        return bound

    def copy(self) -> "GcnModel":
        return self.with_params(self.params())

    def parameter_count(self) -> int:
        return sum(value.size for value in self.params().values())


@dataclass(eq=False)
class GcnCache:
    """Intermediates of ``gcn_forward`` reused by the backward pass."""

    PZ: np.ndarray
    pre: np.ndarray
    H1: np.ndarray
    PH: np.ndarray
    W_tilde: np.ndarray


@dataclass(eq=False)
class GradientSet:
    """One gradient array per model parameter, same names and shapes."""

    grads: dict[str, np.ndarray] = field(default_factory=dict)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.grads[name]

    def names(self) -> list[str]:
        return list(self.grads)

    def check(self, params: Mapping[str, np.ndarray]) -> None:
        """Ensure gradients match ``params`` in names and shapes and are finite."""
        if set(params) != set(self.grads):
            raise ShapeError(f"gradients for {sorted(self.grads)} but parameters {sorted(params)}")
        for name, grad in self.grads.items():
            if grad.shape != params[name].shape:
                raise ShapeError(f"gradient {name} has shape {grad.shape}, expected {params[name].shape}")
            if not np.isfinite(grad).all():
                raise NonFiniteError(name, "non-finite gradient")


def init_model(
    config: GcnConfig,
    vocab_size: int,
    seed: int,
    embeddings: np.ndarray | None = None,
) -> GcnModel:
    """Seeded uniform initialization scaled by 1/sqrt(fan_in).

    Label embeddings come from ``embeddings`` when given, otherwise they are
    drawn uniformly from [-1, 1]. The adapter starts at the identity plus a
    scaled uniform perturbation so that the initial head sees the raw features.

    Raises:
        ShapeError: If ``embeddings`` is not ``vocab_size x d0``.
    """
    rng = np.random.default_rng(seed)

    def uniform(fan_in: int, shape: tuple[int, ...]) -> np.ndarray:
        bound = 1.0 / np.sqrt(fan_in)
        return rng.uniform(-bound, bound, size=shape)

    if embeddings is not None:
        embeddings = np.asarray(embeddings, dtype=np.float64)
        if embeddings.shape != (vocab_size, config.d0):
            raise ShapeError(
                f"embeddings must have shape {(vocab_size, config.d0)}, got {embeddings.shape}"
            )
        Z = embeddings.copy()
    else:
        Z = rng.uniform(-1.0, 1.0, size=(vocab_size, config.d0))

    W1 = uniform(config.d0, (config.d0, config.d1))
    W2 = uniform(config.d1, (config.d1, config.d_feat))
    A = b = None
    if config.use_feature_adapter:
        A = np.eye(config.d_feat) + uniform(config.d_feat, (config.d_feat, config.d_feat))
        b = uniform(config.d_feat, (config.d_feat,))
    return GcnModel(Z=Z, W1=W1, W2=W2, config=config, A=A, b=b)


def leaky(values: np.ndarray, slope: float) -> np.ndarray:
    return np.where(values > 0, values, slope * values)


def gcn_forward(
    model: GcnModel, P1: PropagationMatrix, P2: PropagationMatrix
) -> tuple[np.ndarray, GcnCache]:
    """Propagate label embeddings into the C x d_feat classifier matrix.

    Raises:
        ShapeError: If operator orders or sizes disagree with the model.
    """
    orders = model.config.orders
    if (P1.order, P2.order) != tuple(orders):
        raise ShapeError(f"propagation orders {(P1.order, P2.order)} do not match config {orders}")
    if P1.size != model.size or P2.size != model.size:
        raise ShapeError(f"propagation size {P1.size}/{P2.size} does not match {model.size} labels")

    PZ = P1.matrix @ model.Z
    pre = PZ @ model.W1
    H1 = leaky(pre, model.config.slope)
    PH = P2.matrix @ H1
    W_tilde = PH @ model.W2
    return W_tilde, GcnCache(PZ=PZ, pre=pre, H1=H1, PH=PH, W_tilde=W_tilde)


def adapt(
    features: np.ndarray, adapter: tuple[np.ndarray, np.ndarray] | None
) -> np.ndarray:
    if adapter is None:
        return features
    A, b = adapter
    return features @ A.T + b


def logits(
    W_tilde: np.ndarray,
    features: np.ndarray,
    adapter: tuple[np.ndarray, np.ndarray] | None = None,
) -> np.ndarray:
    """Raw label scores before the logistic; accepts one vector or an n x d_feat batch."""
    features = np.asarray(features, dtype=np.float64)
    if not np.isfinite(features).all():
        raise NonFiniteError("features")
    if features.shape[-1] != W_tilde.shape[1]:
        raise ShapeError(f"features have {features.shape[-1]} dims, classifier expects {W_tilde.shape[1]}")
    return adapt(features, adapter) @ W_tilde.T


def predict(
    W_tilde: np.ndarray,
    x: np.ndarray,
    adapter: tuple[np.ndarray, np.ndarray] | None = None,
) -> np.ndarray:
    """Logistic label scores in (0, 1) for a feature vector or a batch."""
    return expit(logits(W_tilde, x, adapter))


def _check_targets(values: np.ndarray, targets: np.ndarray) -> np.ndarray:
    targets = np.asarray(targets, dtype=np.float64)
    if values.shape != targets.shape:
        raise ShapeError(f"scores shape {values.shape} differs from targets {targets.shape}")
    if not np.isin(targets, (0.0, 1.0)).all():
        raise MetricDomainError("targets must be 0 or 1")
    return targets


def bce_with_logits(raw: np.ndarray, targets: np.ndarray) -> float:
    """Mean binary cross entropy, evaluated as softplus(z) - y z."""
    raw = np.asarray(raw, dtype=np.float64)
    targets = _check_targets(raw, targets)
    return float(np.mean(np.logaddexp(0.0, raw) - targets * raw))


def bce_loss(scores: np.ndarray, targets: np.ndarray) -> float:
    """Mean multi-label cross entropy of scores in (0, 1) against 0/1 targets.

    Raises:
        ShapeError: On mismatched shapes.
        MetricDomainError: If a score is outside the open interval (0, 1).
    """
    scores = np.asarray(scores, dtype=np.float64)
    _check_targets(scores, targets)
    if not ((scores > 0.0) & (scores < 1.0)).all():
        raise MetricDomainError("scores must lie strictly inside (0, 1)")
    return bce_with_logits(logit(scores), targets)


def backward(
    model: GcnModel,
    P1: PropagationMatrix,
    P2: PropagationMatrix,
    features: np.ndarray,
    targets: np.ndarray,
) -> tuple[float, GradientSet]:
    """Loss and exact reverse-mode gradients for every model parameter.

    Raises:
        NonFiniteError: Naming the first parameter whose gradient is not finite.
    """
    W_tilde, cache = gcn_forward(model, P1, P2)
    features = np.asarray(features, dtype=np.float64)
    adapted = adapt(features, model.adapter)
    raw = logits(W_tilde, features, model.adapter)
    loss = bce_with_logits(raw, targets)
    if not np.isfinite(loss):
        raise NonFiniteError("loss", f"loss is {loss}")

    d_raw = (expit(raw) - targets) / raw.size
    d_W_tilde = d_raw.T @ adapted
    grads: dict[str, np.ndarray] = {}

    grads["W2"] = cache.PH.T @ d_W_tilde
    d_H1 = P2.matrix.T @ (d_W_tilde @ model.W2.T)
    d_pre = d_H1 * np.where(cache.pre > 0, 1.0, model.config.slope)
    grads["W1"] = cache.PZ.T @ d_pre
    grads["Z"] = P1.matrix.T @ (d_pre @ model.W1.T)

    if model.A is not None:
        d_adapted = d_raw @ W_tilde
        grads["A"] = d_adapted.T @ features
        grads["b"] = d_adapted.sum(axis=0)

    gradient_set = GradientSet({name: grads[name] for name in PARAM_ORDER if name in grads})
    gradient_set.check(model.params())
    return loss, gradient_set


@dataclass(eq=False)
class GcnHead:
    """A GCN model bound to its propagation operators, ready to score features."""

    model: GcnModel
    P1: PropagationMatrix
    P2: PropagationMatrix

    def classifier(self) -> np.ndarray:
        return gcn_forward(self.model, self.P1, self.P2)[0]

    def scores(self, features: np.ndarray) -> np.ndarray:
        return predict(self.classifier(), features, self.model.adapter)
