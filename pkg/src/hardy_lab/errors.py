"""Exception hierarchy shared by all hardy_lab modules."""


class HardyLabError(Exception):
    """Base class for every error raised by hardy_lab."""


class ConfigurationError(HardyLabError, ValueError):
    pass


class DomainError(HardyLabError, ValueError):
    """A point lies outside the rectangle."""


class QuadratureError(HardyLabError, ValueError):
    pass


class ResolutionError(HardyLabError, ValueError):
    """A ball is too small to be resolved by the grid."""


class DegenerateInputError(HardyLabError, ValueError):
    pass


class PreconditionError(HardyLabError, ValueError):
    pass


class GenerationError(HardyLabError, RuntimeError):
    pass


class AssemblyError(HardyLabError, RuntimeError):
    pass


class ConvergenceError(HardyLabError, RuntimeError):
    """Raised when an iterative estimate fails to converge.

    The best iterate found so far is attached as ``best`` so callers can
    still inspect or report it.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class SizeGuardError(HardyLabError, ValueError):
    pass
