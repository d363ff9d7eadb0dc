"""Exception hierarchy.

Validation-type errors (bad parameters, bad data) map to CLI exit code 1,
numerical failures (divergence, accuracy, instability) to exit code 2.
"""


class DispersionLabError(Exception):
    exit_code = 1


class ValidationError(DispersionLabError, ValueError):
    """Input violates an operation's preconditions."""


class DomainError(ValidationError):
    """A parameter lies outside the domain where the quantity is defined."""


class ShapeError(ValidationError):
    """Fields or grids do not line up."""


class DataError(ValidationError):
    """Sampled input data do not satisfy the required structure."""


class NumericalError(DispersionLabError, ArithmeticError):
    exit_code = 2


class NonIntegrableError(NumericalError):
    """The integrand blows up at an endpoint with exponent >= 1."""


class QuadratureAccuracyError(NumericalError):
    """Refinement budget exhausted before reaching the requested tolerance."""

    def __init__(self, message, value=float("nan"), error_estimate=float("inf")):
        super().__init__(message)
        self.value = value
        self.error_estimate = error_estimate


class InstabilityError(NumericalError):
    """A time integration blew up; ``last_frame`` holds the last good state."""

    def __init__(self, message, last_frame=None, time=None):
        super().__init__(message)
        self.last_frame = last_frame
        self.time = time


class ConservationError(NumericalError):
    """A conserved quantity drifted beyond its tolerance during a run."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
