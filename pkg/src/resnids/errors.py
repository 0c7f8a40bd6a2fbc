"""Exception types shared across the package, mapped to CLI exit codes."""

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


class ShapeError(ValueError):
    """Tensor or layer shape mismatch; message names both shapes."""


class ConfigError(ValueError):
    """Invalid user-supplied configuration (flags, hyperparameters, paths)."""


class DataError(ValueError):
    """Malformed dataset content (bad column counts, unknown labels, ...)."""


class NumericError(RuntimeError):
    """Non-finite value where the training contract requires finiteness."""
