"""Exception hierarchy shared by all modules."""


class HardyLabError(Exception):
    """Base class for errors raised by hardylab."""


class DomainError(HardyLabError, ValueError):
    """An argument lies outside the domain of an operation."""


class CapabilityError(HardyLabError):
    """The requested combination is not supported by this build."""


class AccuracyError(HardyLabError):
    """A numerical result failed to reach the requested tolerance."""


class EvaluationError(HardyLabError):
    """An integrand or field produced a non-finite value."""


class DegenerateTrialError(HardyLabError):
    """A trial function has a (numerically) vanishing denominator."""


class ConvergenceError(HardyLabError):
    """An iterative solver did not converge within its iteration cap."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
