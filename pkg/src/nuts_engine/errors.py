"""Exception hierarchy shared by every sampler and model."""


class NutsEngineError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(NutsEngineError, ValueError):
    """Invalid arguments, shapes, or incompatible settings."""


class EvaluationError(NutsEngineError, ArithmeticError):
    """A log density or gradient produced a non-finite value.

    ``index`` is the offending coordinate when one can be identified.
    """

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class InitializationError(NutsEngineError):
    """The step-size heuristic could not find a usable starting value."""


class ControllerError(NutsEngineError):
    """The dual-averaging controller received an unusable statistic."""


class TuningError(NutsEngineError):
    """Pilot-run tuning failed to bracket its target."""


class DataParseError(NutsEngineError, ValueError):
    """A data file could not be parsed; ``line`` is 1-based."""

    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line
