"""Exception types shared across the package."""


class GPLabError(Exception):
    """Base class for all package errors."""


class NonConvergence(GPLabError):
    """An iterative procedure failed to reach its tolerance.

    ``best`` optionally carries the best-so-far result.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class InvalidDomain(GPLabError):
    pass


class CutoffTooSmall(GPLabError):
    pass


class DimensionOverflow(GPLabError):
    pass


class SectorMismatch(GPLabError):
    pass


class AsymmetricEta(GPLabError):
    pass


class OrderTooLarge(GPLabError):
    pass


class ValidationFailure(GPLabError):
    """A structural or numerical identity check failed.

    ``offender`` holds the first offending object (e.g. a symbolic term).
    """

    def __init__(self, message, offender=None):
        super().__init__(message)
        self.offender = offender


class ConfigError(GPLabError):
    pass
