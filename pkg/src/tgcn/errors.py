"""Exception hierarchy shared across the package."""


class TgcnError(Exception):
    """Base class for all package errors."""


class InvalidGraph(TgcnError):
    """Adjacency matrix violates a structural precondition."""


class ParseError(TgcnError):
    """A CSV input could not be parsed; message carries row/column location."""


class ShapeError(TgcnError):
    """Tensor shapes are incompatible for the requested operation."""


class ContractError(TgcnError):
    """An API contract was violated (e.g. backward on a non-scalar)."""


class CheckpointError(TgcnError):
    """Checkpoint file is corrupt, truncated, or incompatible."""


class TrainingDiverged(TgcnError):
    """A non-finite gradient or loss appeared during optimization."""


class DataError(TgcnError):
    """Dataset-level problem (constant series, fully-missing node, ...)."""


class ConfigError(TgcnError):
    """Invalid configuration value."""
