"""Exception hierarchy shared by every pcfm module."""


class PcfmError(Exception):
    """Base class for all library errors."""

    exit_code = 1


class ConfigParseError(PcfmError):
    """Configuration text does not conform to the schema."""

    exit_code = 3

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class ValidationError(PcfmError):
    """A scenario object violates a domain invariant."""

    exit_code = 4


class FormatError(PcfmError):
    """A tabular input file is malformed."""

    exit_code = 5


class NumericError(PcfmError):
    """A numerical routine cannot produce a trustworthy value."""

    exit_code = 6


class SingularDispersionError(NumericError):
    """Closed-form XCI requested at zero dispersion."""


class AccuracyError(NumericError):
    """A quadrature did not reach its tolerance within budget."""

    def __init__(self, message, estimate=None, error=None):
        self.estimate = estimate
        self.error = error
        super().__init__(message)


class ConvergenceError(NumericError):
    """Fixed-point iteration failed to converge."""

    def __init__(self, message, residual=None):
        self.residual = residual
        super().__init__(message)


class StiffnessError(NumericError):
    """ODE integration produced a non-physical (negative) power."""


class Cancelled(PcfmError):
    """A long-running oracle call was cancelled cooperatively."""

    exit_code = 8
