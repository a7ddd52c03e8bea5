"""Exception hierarchy shared by all modules."""


class MLMCError(Exception):
    """Base class for every error raised by the package."""


class InvalidResolution(MLMCError, ValueError):
    pass


class CapacityError(MLMCError):
    """State count exceeds the configured cap."""

    def __init__(self, message, n_states=None, cap=None, level=None):
        super().__init__(message)
        self.n_states = n_states
        self.cap = cap
        self.level = level


class OutOfDomainError(MLMCError, ValueError):
    pass


class LevelError(MLMCError, ValueError):
    """Vectors or partitions that are not a dyadically nested level pair."""


class BadDensityError(MLMCError, ValueError):
    pass


class KernelLeakageError(MLMCError):
    pass


class QuadratureError(MLMCError):
    pass


class StationaryError(MLMCError):
    """Stationary density is not unique or power iteration failed to converge."""


class SymmetrizationError(MLMCError):
    def __init__(self, message, bins=()):
        super().__init__(message)
        self.bins = tuple(bins)


class InvalidParameter(MLMCError, ValueError):
    pass


class ConfigError(MLMCError, ValueError):
    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field
