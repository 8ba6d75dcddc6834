"""Exception types raised across the package."""


class MlmcForecastError(Exception):
    """Base class for all package-specific errors."""


class EmptyEnsembleError(MlmcForecastError, ValueError):
    """An operation that needs at least one sample received none."""


class InsufficientSamplesError(MlmcForecastError, ValueError):
    """A statistic needs more samples than the ensemble provides."""


class InvalidStepError(MlmcForecastError, ValueError):
    """A time step was zero or negative."""


class GridAlignmentError(MlmcForecastError, ValueError):
    """A time span is not divisible by the required step."""


class StructureError(MlmcForecastError, ValueError):
    """A hierarchy or ensemble container violates its shape invariants."""


class InvalidToleranceError(MlmcForecastError, ValueError):
    """A tolerance parameter was zero or negative."""


class ToleranceNotMetError(MlmcForecastError, RuntimeError):
    """The adaptive driver hit its level cap before converging.

    Carries the partial result so callers can inspect how far it got.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class BudgetTooSmallError(MlmcForecastError, ValueError):
    """A compute budget produced an empty ensemble on some level."""


class DomainError(MlmcForecastError, ValueError):
    """An argument fell outside its mathematical domain."""


class ConfigError(MlmcForecastError, ValueError):
    """An experiment configuration is missing or malformed."""


class FileFormatError(MlmcForecastError, ValueError):
    """A serialized artifact violates its documented schema.

    ``row`` is the 1-based data row at fault, when known.
    """

    def __init__(self, message, row=None):
        if row is not None:
            message = f"{message} (row {row})"
        super().__init__(message)
        self.row = row
