"""Exception hierarchy shared by all semprop modules."""


class SempropError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(SempropError, ValueError):
    """An argument violates a documented precondition or invariant."""


class MomentUndefinedError(SempropError):
    """A requested moment does not exist for the given parameters.

    Carries the offending component index (1-based) and, where relevant,
    the branch index.
    """

    def __init__(self, message, component=None, branch=None):
        super().__init__(message)
        self.component = component
        self.branch = branch


class SingularProjectionError(SempropError):
    """A moment-matching denominator collapsed and no fallback was supplied."""

    def __init__(self, message, component=None):
        super().__init__(message)
        self.component = component


class InvalidParameterError(SempropError):
    """A projection produced parameters outside the valid domain."""

    def __init__(self, message, component=None):
        super().__init__(message)
        self.component = component


class InitError(SempropError):
    """A prior cannot be initialized from the given table row."""

    def __init__(self, message, class_name=None):
        super().__init__(message)
        self.class_name = class_name


class InvalidContactError(DomainError):
    """A force sample cannot be converted to a friction measurement."""


class MeasurementUpdateError(SempropError):
    """A sequential update failed; carries the measurement index."""

    def __init__(self, message, index):
        super().__init__(message)
        self.index = index


class CellNotFoundError(SempropError, KeyError):
    """The queried voxel does not exist in the grid."""


class PrecisionError(SempropError):
    """A numerical oracle failed its own convergence check."""


class ConfigError(SempropError):
    """A scenario configuration is invalid; carries the offending key path."""

    def __init__(self, message, path=""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class PsiOutOfRangeWarning(UserWarning):
    """A converted property measurement exceeded the configured sanity bound."""
