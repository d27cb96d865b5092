"""Linear head on frozen features: scores = logistic(W x + bias)."""

import copy
from collections.abc import Mapping
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from ddgcn.errors import NonFiniteError, ShapeError
from ddgcn.model.gcn import GradientSet, bce_with_logits


@dataclass(eq=False)
class LinearBaseline:
    W: np.ndarray
    bias: np.ndarray

    def __post_init__(self) -> None:
        if self.W.ndim != 2 or self.bias.shape != (self.W.shape[0],):
            raise ShapeError(f"W {self.W.shape} and bias {self.bias.shape} are inconsistent")
        for name in ("W", "bias"):
            if not np.isfinite(getattr(self, name)).all():
                raise NonFiniteError(name)

    @property
    def size(self) -> int:
        return int(self.W.shape[0])

    def params(self) -> dict[str, np.ndarray]:
        return {"W": self.W, "bias": self.bias}

    def with_params(self, params: Mapping[str, np.ndarray]) -> "LinearBaseline":
        return LinearBaseline(
            W=np.array(params["W"], dtype=np.float64),
            bias=np.array(params["bias"], dtype=np.float64),
        )

    def view(self, params: Mapping[str, np.ndarray]) -> "LinearBaseline":
        """Shares the given arrays without copying or re-validating them."""
        bound = copy.copy(self)
        bound.W, bound.bias = params["W"], params["bias"]
        return bound

    def logits(self, features: np.ndarray) -> np.ndarray:
        features = np.asarray(features, dtype=np.float64)
        if not np.isfinite(features).all():
            raise NonFiniteError("features")
        if features.shape[-1] != self.W.shape[1]:
            raise ShapeError(f"features have {features.shape[-1]} dims, head expects {self.W.shape[1]}")
        return features @ self.W.T + self.bias

    def scores(self, features: np.ndarray) -> np.ndarray:
        return expit(self.logits(features))

    def loss_and_grads(
        self, features: np.ndarray, targets: np.ndarray
    ) -> tuple[float, GradientSet]:
        raw = self.logits(features)
        loss = bce_with_logits(raw, targets)
        d_raw = (expit(raw) - targets) / raw.size
        grads = GradientSet({"W": d_raw.T @ features, "bias": d_raw.sum(axis=0)})
        grads.check(self.params())
        return loss, grads


def init_linear_baseline(size: int, d_feat: int, seed: int) -> LinearBaseline:
    """Seeded uniform weights in +-1/sqrt(d_feat)."""
    rng = np.random.default_rng(seed)
    bound = 1.0 / np.sqrt(d_feat)
    return LinearBaseline(
        W=rng.uniform(-bound, bound, size=(size, d_feat)),
        bias=rng.uniform(-bound, bound, size=(size,)),
    )
