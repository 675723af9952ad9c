"""Exception types shared across the toolkit."""


class DoughslitError(Exception):
    """Base class for all toolkit errors."""


class InvalidParameterError(DoughslitError, ValueError):
    """A parameter violates its documented precondition or invariant."""


class UnderResolutionError(InvalidParameterError):
    """A wave packet is too narrow for the grid to resolve."""


class EmptyProfileError(DoughslitError, ValueError):
    """A screen profile was requested from a frame with no probability."""


class SolverFailure(DoughslitError, RuntimeError):
    """The implicit linear solve did not meet the residual tolerance.

    Carries the relative residual and, when raised from an evolution loop,
    the index of the failing step.
    """

    def __init__(self, message: str, residual: float, step_index: int | None = None):
        super().__init__(message)
        self.residual = residual
        self.step_index = step_index


class FormatError(DoughslitError, ValueError):
    """A file does not conform to its documented on-disk format."""
