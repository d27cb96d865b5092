"""Exceptions raised by ddgcn.

Everything derives from DdgcnError so the CLI can turn any library failure
into a single diagnostic line.
"""


class DdgcnError(Exception):
    """Base class for all ddgcn failures."""


class ConfigurationError(DdgcnError):
    """Raised when configuration is invalid or incomplete."""


class VocabularyError(DdgcnError):
    """Raised for unknown or duplicate labels."""


class GraphError(DdgcnError):
    """Raised when a label graph cannot be built or parsed."""


class ShapeError(DdgcnError):
    """Raised on inconsistent array dimensions."""


class DataFormatError(DdgcnError):
    """Raised when an input file is malformed."""

    def __init__(self, message: str, line: int | None = None) -> None:
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class MetricDomainError(DdgcnError):
    """Raised when a metric precondition fails for a row or class."""


class NonFiniteError(DdgcnError):
    """Raised when a value that must be finite is not."""

    def __init__(self, name: str, message: str = "non-finite values") -> None:
        self.name = name
        super().__init__(f"{name}: {message}")


class TrainingDivergedError(DdgcnError):
    """Raised when the training loss stops being finite."""

    def __init__(self, epoch: int, loss: float) -> None:
        self.epoch = epoch
        super().__init__(f"loss became {loss} at epoch {epoch}")


class ZeroCenteredNormError(DdgcnError):
    """Raised when a vector is constant, so its centered norm is zero."""
