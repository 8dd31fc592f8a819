"""Exception types raised across the package."""


class MdlPredictError(Exception):
    """Base class for all package-specific errors."""


class InvalidSpecError(MdlPredictError, ValueError):
    """A measure or model-class specification is malformed.

    The message names the offending field.
    """


class UndefinedConditionalError(MdlPredictError, ValueError):
    """A conditional was requested given a prefix of probability zero."""


class AllExcludedError(MdlPredictError, RuntimeError):
    """Every enumerated model assigns probability zero to the observed prefix."""


class ClassNotDeterministicError(MdlPredictError, TypeError):
    """A deterministic-class algorithm was given a stochastic model class."""


class BudgetExceededError(MdlPredictError, ValueError):
    """An exact computation would exceed its enumeration budget.

    The message points at the Monte Carlo estimator as the fallback.
    """


class CutoffExhaustedError(MdlPredictError, RuntimeError):
    """An enumeration cutoff was reached before the requested condition held."""


class ConfigError(MdlPredictError, ValueError):
    """An experiment configuration failed validation.

    The message names the offending key path.
    """


class InsufficientDataError(MdlPredictError, RuntimeError):
    """Recorded results lack a field a bound check needs.

    Raised when a check is pointed at records produced without the
    predictor, estimator or checkpoint the bound reads.
    """
