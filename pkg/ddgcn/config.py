"""Load all user defined config and env vars."""

import logging
import os
from enum import Enum
from pathlib import Path
from typing import TypeVar

from pydantic import (  # pylint: disable=no-name-in-module
    BaseModel,
    ConfigDict,
    Field,
    ValidationError,
    field_validator,
    model_validator,
)

from ddgcn import const
from ddgcn.errors import ConfigurationError
from ddgcn.utils.io import atomic_write_text, read_text


class DdgcnModel(BaseModel):
    model_config = ConfigDict(populate_by_name=True, validate_assignment=True)


M = TypeVar("M", bound=DdgcnModel)


class PropagationFilter(str, Enum):
    """Basis used to realize an order-k graph filter."""

    POWER = "power"
    CHEBYSHEV = "chebyshev"


class GraphSettings(DdgcnModel):
    """How label graphs are built and turned into propagation operators."""

    t: float = const.DEFAULT_T
    density: float = 0.1
    filter: PropagationFilter = PropagationFilter.POWER

    @field_validator("t", "density")
    @classmethod
    def validate_unit(cls, val: float) -> float:  # pylint: disable=no-self-argument
        if not 0.0 <= val <= 1.0:
            raise ValueError(f"must be within [0, 1], got {val}")
        return val


class GcnConfig(DdgcnModel):
    """Dimensions and shape of the GCN branch."""

    d0: int = const.DEFAULT_D0
    d1: int = const.DEFAULT_D1
    d_feat: int = const.DEFAULT_D_FEAT
    orders: tuple[int, int] = (1, 2)
    slope: float = const.DEFAULT_SLOPE
    use_feature_adapter: bool = Field(True, alias="adapter")

    @field_validator("d0", "d1", "d_feat")
    @classmethod
    def validate_dim(cls, val: int) -> int:  # pylint: disable=no-self-argument
        if val < 1:
            raise ValueError(f"dimensions must be >= 1, got {val}")
        return val

    @field_validator("orders")
    @classmethod
    def validate_orders(cls, val: tuple[int, int]) -> tuple[int, int]:
        if min(val) < 1:
            raise ValueError(f"propagation orders must be >= 1, got {val}")
        return val

    @field_validator("slope")
    @classmethod
    def validate_slope(cls, val: float) -> float:  # pylint: disable=no-self-argument
        if not 0.0 <= val < 1.0:
            raise ValueError(f"activation slope must be in [0, 1), got {val}")
        return val


class ScheduleKind(str, Enum):
    CONSTANT = "constant"
    STEP = "step"


class LrSchedule(DdgcnModel):
    kind: ScheduleKind = ScheduleKind.CONSTANT
    factor: float = 0.1
    every_n: int = 100

    @field_validator("every_n")
    @classmethod
    def validate_every_n(cls, val: int) -> int:  # pylint: disable=no-self-argument
        if val < 1:
            raise ValueError(f"step interval must be >= 1, got {val}")
        return val

    def rate(self, base: float, epoch: int) -> float:
        """Learning rate for a zero-based epoch index."""
        if self.kind is ScheduleKind.CONSTANT:
            return base
        return base * self.factor ** (epoch // self.every_n)


class TrainConfig(DdgcnModel):
    """Mini-batch gradient descent settings."""

    learning_rate: float = Field(const.DEFAULT_LR, alias="lr")
    epochs: int = const.DEFAULT_EPOCHS
    batch_size: int = 32
    seed: int = 0
    weight_decay: float = 0.0
    lr_schedule: LrSchedule = LrSchedule()

    @field_validator("learning_rate")
    @classmethod
    def validate_lr(cls, val: float) -> float:  # pylint: disable=no-self-argument
        # lr=0 is accepted: it turns training into the identity on parameters
        if val < 0:
            raise ValueError(f"learning rate must not be negative, got {val}")
        return val

    @field_validator("epochs", "batch_size")
    @classmethod
    def validate_positive(cls, val: int) -> int:  # pylint: disable=no-self-argument
        if val < 1:
            raise ValueError(f"must be >= 1, got {val}")
        return val


def _check_distribution(val: dict[int, float], exact: bool = False) -> dict[int, float]:
    if any(size < 1 for size in val):
        raise ValueError(f"label-set sizes must be >= 1, got {sorted(val)}")
    if any(p < 0 for p in val.values()):
        raise ValueError("probabilities must not be negative")
    total = sum(val.values())
    if total > 1.0 + 1e-9:
        raise ValueError(f"probabilities sum to {total}, above 1")
    if exact and abs(total - 1.0) > 1e-9:
        raise ValueError(f"probabilities must sum to 1, got {total}")
    return dict(sorted(val.items()))


class SynthConfig(DdgcnModel):
    """Planted-cluster generator for the incomplete-label regime."""

    C: int = 40
    n_clusters: int = 8
    d_feat: int = const.DEFAULT_D_FEAT
    n_train: int = 5000
    n_test: int = 1000
    sigma: float = 1.0
    label_signal: float = 0.0
    complete_sizes: dict[int, float] = {4: 0.5, 5: 0.5}
    train_mask: dict[int, float] = dict(const.TRAIN_MASK)
    test_mask: dict[int, float] = dict(const.TEST_MASK)
    seed: int = 0

    @field_validator("complete_sizes")
    @classmethod
    def validate_complete(cls, val: dict[int, float]) -> dict[int, float]:
        return _check_distribution(val, exact=True)

    @field_validator("train_mask", "test_mask")
    @classmethod
    def validate_mask(cls, val: dict[int, float]) -> dict[int, float]:
        return _check_distribution(val)

    @field_validator("sigma", "label_signal")
    @classmethod
    def validate_nonnegative(cls, val: float) -> float:
        if val < 0:
            raise ValueError(f"must not be negative, got {val}")
        return val

    @model_validator(mode="after")
    def validate_sizes(self) -> "SynthConfig":
        if self.C < 2:
            raise ValueError(f"need at least 2 labels, got {self.C}")
        if not 1 <= self.n_clusters <= self.C:
            raise ValueError(f"n_clusters must be in [1, {self.C}], got {self.n_clusters}")
        if self.d_feat < 1 or self.n_train < 1 or self.n_test < 1:
            raise ValueError("d_feat, n_train and n_test must be >= 1")
        return self


class EvalSettings(DdgcnModel):
    threshold: float = 0.5
    extra_ranks: list[int] = []
    cluster_threshold: float = 0.5


class Config(DdgcnModel):
    """The blueprint for ddgcn's whole config."""

    graph: GraphSettings = GraphSettings()
    gcn: GcnConfig = GcnConfig()
    train: TrainConfig = TrainConfig()
    synth: SynthConfig = SynthConfig()
    eval: EvalSettings = EvalSettings()


def updated(model: M, **changes) -> M:
    """Return a validated copy of ``model`` with ``changes`` applied.

    ``None`` values are ignored so CLI flags left unset keep config values.

    Raises:
        ConfigurationError: If the result fails validation.
    """
    changes = {key: val for key, val in changes.items() if val is not None}
    data = model.model_dump()
    data.update(changes)
    try:
        return type(model).model_validate(data)
    except ValidationError as err:
        raise ConfigurationError(str(err).replace("\n", " ")) from err


def config_path_from_env(default: str = const.CONFIG_FILE_NAME) -> str:
    """Config file location, honouring the DDGCN_CONFIG variable."""
    return os.getenv(const.CONFIG_ENV_VAR_NAME, default)


def write_config(config: Config, path: str | Path = const.CONFIG_FILE_NAME) -> None:
    """Write config atomically to prevent corruption on crash.

    Args:
        config: Config object to serialize
        path: File path to write to (defaults to CONFIG_FILE_NAME)
    """
    atomic_write_text(path, config.model_dump_json(indent=2, by_alias=True))


def read_config(path: str | Path = const.CONFIG_FILE_NAME) -> Config:
    """Load the configuration from file.

    Args:
        path: File path to read from (defaults to CONFIG_FILE_NAME)
    """
    try:
        return Config.model_validate_json(read_text(path))
    except FileNotFoundError:
        logging.warning(f"{path} not found, using default config")
        return Config()
    except ValidationError as err:
        logging.error(f"Failed to parse {path}: {err}")
        raise ConfigurationError(f"invalid config file {path}") from err
