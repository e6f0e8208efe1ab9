"""Exception hierarchy shared by the solver, harness and CLI."""


class LLGError(Exception):
    """Base class for all solver errors."""

    # Set by the time loop when an error escapes a step.
    step: int | None = None


class UsageError(LLGError, ValueError):
    """Invalid arguments or configuration."""


class StateError(LLGError, RuntimeError):
    """Operation invoked on an object in the wrong state (e.g. cold history)."""


class SolverError(LLGError, RuntimeError):
    """Iterative linear solve did not converge."""

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class ProjectionError(LLGError, RuntimeError):
    """The corrected field vanished at a grid point, so it cannot be normalised."""

    def __init__(self, message: str, index: tuple, magnitude: float):
        super().__init__(message)
        self.index = index
        self.magnitude = magnitude


class InvariantError(LLGError, RuntimeError):
    """A runtime-checked structural property was violated."""


class NonFiniteError(LLGError, FloatingPointError):
    """NaN or inf appeared in a field."""
