"""Exception types shared across the toolkit.

Plain ``ValueError`` is used for simple argument violations (negative
stddev, out-of-range fractions, empty batches); the classes below mark
failures a caller may want to handle distinctly.
"""

from __future__ import annotations


class MemebgError(Exception):
    """Base class for all toolkit-specific errors."""


class ShapeError(MemebgError):
    """Matrix dimensions incompatible with the requested operation."""


class DataError(MemebgError):
    """Base class for dataset ingestion problems."""


class ParseError(DataError):
    """Malformed CSV structure or a non-numeric cell."""


class SchemaError(DataError):
    """Label value outside the task's class vocabulary."""


class JoinError(DataError):
    """Sample ids do not match up between the embeddings and labels files."""


class FormatError(MemebgError):
    """Checkpoint file is malformed, truncated, or inconsistent."""


class ConfigError(MemebgError):
    """Invalid experiment, architecture, or training configuration."""


class DivergenceError(MemebgError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch: int, learning_rate: float):
        super().__init__(
            f"non-finite loss at epoch {epoch} (learning_rate={learning_rate})"
        )
        self.epoch = epoch
        self.learning_rate = learning_rate


class DegenerateVarianceError(MemebgError):
    """All fold variances are zero but the numerator difference is not."""
