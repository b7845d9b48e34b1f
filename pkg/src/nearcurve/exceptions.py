"""Exception hierarchy.

Errors split into two families that the CLI maps to different exit codes:
domain errors (bad input, refused workloads) and falsification errors
(a computed result contradicts one of the checked bounds).
"""


class NearCurveError(Exception):
    """Base class for all package errors."""


class DomainError(NearCurveError, ValueError):
    """An argument lies outside the admissible range of an operation."""


class SpecError(DomainError):
    """A curve or approximating-function spec string could not be parsed."""


class DegenerateCurvatureError(DomainError):
    """f'' vanishes or changes sign on the interval."""


class BudgetExceededError(NearCurveError, RuntimeError):
    """A workload exceeds the configured enumeration budget."""


class BadPointError(DomainError):
    """The point lies in the exceptional set; the witness construction does not apply."""


class FalsificationError(NearCurveError):
    """A result contradicts a bound or construction that should hold."""


class WitnessConstructionError(FalsificationError):
    """A postcondition of the witness construction failed numerically."""

    def __init__(self, message, inequality=None):
        super().__init__(message)
        self.inequality = inequality


class CalibrationFailedError(FalsificationError):
    """No admissible constants were found for the covering statement."""


class SurrogateViolation(FalsificationError):
    """An empirical bound surrogate failed on a scan."""
