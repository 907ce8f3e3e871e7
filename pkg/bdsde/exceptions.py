"""Exception hierarchy for the bdsde package."""


class BDSDEError(Exception):
    """Base class for every error raised by bdsde."""


class ConfigurationError(BDSDEError):
    """Bad experiment configuration, unknown keys or an infeasible setup."""


class ConditionError(ConfigurationError):
    """Hard failure of the structural conditions on a problem."""

    def __init__(self, message, report=None):
        super(ConditionError, self).__init__(message)
        self.report = report


class ValidationError(BDSDEError, ValueError):
    """Invalid arguments passed to a library function."""


class SpanError(ValidationError, IndexError):
    """A time or offset falls outside the span of a sampled path."""


class UsageError(ValidationError):
    """An operation was asked for something the inputs were not built for."""


class DomainError(ValidationError):
    """Function evaluated outside its domain."""


class NumericalError(BDSDEError, ArithmeticError):
    """Non-finite numbers produced during a simulation."""

    def __init__(self, message, particle=None):
        super(NumericalError, self).__init__(message)
        self.particle = particle


class DivergenceError(NumericalError):
    """An iteration failed to converge; `history` holds the monitored norms."""

    def __init__(self, message, history=None, ratios=None):
        super(DivergenceError, self).__init__(message)
        self.history = list(history or [])
        self.ratios = list(ratios or [])


class MomentBlowUpError(NumericalError):
    """A moment estimate came out NaN or infinite."""
