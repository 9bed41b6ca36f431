"""Exception hierarchy shared by all modules."""


class PerronError(Exception):
    """Base class for every error raised by this package."""


class InvalidPoint(PerronError, ValueError):
    pass


class InvalidParameter(PerronError, ValueError):
    pass


class InvalidInput(PerronError, ValueError):
    pass


class EvaluationError(PerronError):
    """An observable produced a non-finite value.

    ``index`` is the position of the first offending node in the evaluated
    batch (``None`` for scalar evaluation).
    """

    def __init__(self, message, index=None):
        super().__init__(message if index is None else f"{message} (node {index})")
        self.index = index


class GradientError(PerronError):
    pass


class DegenerateMap(PerronError, ValueError):
    pass


class RootSolveError(PerronError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class SamplingError(PerronError):
    pass


class ExceptionalStartError(SamplingError):
    pass


class InvalidDensity(PerronError, ValueError):
    pass


class InsufficientSignal(PerronError):
    """Too few significant correlation lags to fit a decay rate."""


class OverflowGuard(PerronError, OverflowError):
    pass


class TreeSizeExceeded(PerronError):
    pass


class InsufficientSample(PerronError):
    pass


class IllConditionedDictionary(PerronError):
    pass


class DiscretizationRejected(PerronError):
    pass


class EigenSolveError(PerronError):
    pass


class InvalidCurve(PerronError, ValueError):
    pass


class DegenerateVariance(PerronError):
    """The Green-Kubo variance is not significantly positive."""

    def __init__(self, message, sigma2=None, std_error=None):
        super().__init__(message)
        self.sigma2 = sigma2
        self.std_error = std_error


class CocycleDetected(PerronError):
    pass


class ConfigError(PerronError, ValueError):
    pass
