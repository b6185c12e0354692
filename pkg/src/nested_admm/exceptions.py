"""Exception hierarchy shared by every module of the package."""


class NestedADMMError(Exception):
    """Base class for all errors raised by this package."""


class InvalidMatrix(NestedADMMError, ValueError):
    pass


class NumericalFailure(NestedADMMError, ArithmeticError):
    """An iterative numerical routine did not converge.

    Parameters
    ----------
    message : str
    iterations : int
        Number of iterations performed before giving up.
    """

    def __init__(self, message, iterations=None):
        super().__init__(message)
        self.iterations = iterations


class EmptyBatch(NestedADMMError, ValueError):
    pass


class UnsupportedMode(NestedADMMError, ValueError):
    pass


class DimensionError(NestedADMMError, ValueError):
    pass


class InsufficientProbes(NestedADMMError, ValueError):
    pass


class InvalidStep(NestedADMMError, ValueError):
    pass


class EpochBoundary(NestedADMMError, RuntimeError):
    """A SPIDER recursion was requested past the end of its epoch."""


class InvalidTolerance(NestedADMMError, ValueError):
    pass


class ConfigError(NestedADMMError, ValueError):
    pass


class EmptyRun(NestedADMMError, ValueError):
    pass


class InsufficientHistory(NestedADMMError, ValueError):
    pass


class GeneratorError(NestedADMMError, ValueError):
    pass


class ConfigParseError(NestedADMMError, ValueError):
    """Experiment configuration could not be parsed.

    The offending line number is kept in ``lineno`` when known.
    """

    def __init__(self, message, lineno=None):
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
        self.lineno = lineno


class IoError(NestedADMMError, OSError):
    pass
