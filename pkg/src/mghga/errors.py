"""Exception types shared across the package."""


class MGHGAError(Exception):
    """Base class for all package errors."""


class ConfigError(MGHGAError, ValueError):
    """Invalid configuration value (bad K, epsilon, budget, fractions, ...)."""


class DimensionError(MGHGAError, ValueError):
    """Array shapes incompatible with the requested operation."""


class DataFormatError(MGHGAError, ValueError):
    """On-disk data failed to parse or violates its declared schema."""


class DegenerateHypergraphError(MGHGAError, ValueError):
    """A node or hyperedge has zero degree, so the normalized operator is undefined."""


class FeatureModeError(MGHGAError, ValueError):
    """Feature values incompatible with the configured feature mode."""


class SelectionError(MGHGAError, RuntimeError):
    """No eligible feature cell remains to attack."""


class DivergenceError(MGHGAError, RuntimeError):
    """Training produced a non-finite loss."""

    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch
