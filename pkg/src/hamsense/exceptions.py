"""Exception hierarchy shared by every module of the package."""


class HamsenseError(Exception):
    """Base class for all package errors."""


class ValidationError(HamsenseError, ValueError):
    """An input array or object violates its documented contract."""


class CapacityError(HamsenseError, ValueError):
    """The requested system is larger than the dense backend supports."""


class ParameterError(HamsenseError, ValueError):
    """A model or sampler parameter is out of range."""


class ConfigError(HamsenseError, ValueError):
    """A configuration file or noise specification could not be interpreted.

    Parameters
    ----------
    message : str
        Human readable description.
    line : int, optional
        1-based line in the offending file, when known.
    """

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class InsufficientDataError(HamsenseError, ValueError):
    """Not enough results were supplied to compute a statistic."""
