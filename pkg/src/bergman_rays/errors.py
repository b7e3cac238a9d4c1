"""Exception hierarchy; each class maps to one CLI exit code."""


class BergmanRayError(Exception):
    exit_code = 1


class ConfigError(BergmanRayError, ValueError):
    exit_code = 1


class NumericalFailure(BergmanRayError, ArithmeticError):
    """Raised when a numerical routine misses its tolerance.

    ``achieved`` carries the best error estimate reached.
    """

    exit_code = 2

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class InvariantViolation(BergmanRayError, AssertionError):
    """A proven inequality or exact identity failed; ``record`` holds the evidence."""

    exit_code = 3

    def __init__(self, message, record=None):
        super().__init__(message)
        self.record = record if record is not None else {}
