"""Exception types raised by the solvers."""


class DispatchError(ValueError):
    """Base class for all solver errors."""


class DomainError(DispatchError):
    """An argument lies outside the admissible domain."""


class InvalidCurveError(DispatchError):
    """A curve (or fleet) violates its invariants."""


class NoSolutionError(DispatchError):
    """An equation has no solution (e.g. efficiency level above the peak)."""


class CapacityError(DispatchError):
    """A solution exists but exceeds a unit's admissible input."""


class InfeasibleError(DispatchError):
    """The requested total cannot be served by the units available.

    ``limit`` carries the relevant bound (fleet capacity or maximum output).
    """

    def __init__(self, message, limit=None):
        super().__init__(message)
        self.limit = limit


class UnsupportedError(DispatchError):
    """The request is outside what the routine supports (e.g. oracle size)."""
