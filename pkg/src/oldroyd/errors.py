"""Exception classes shared across the package."""


class OldroydError(Exception):
    """Base class for all package errors."""


class ParameterError(OldroydError, ValueError):
    """A physical or numerical parameter violates its admissible range."""


class C1ExceedsOneError(OldroydError):
    """The existence threshold C_I <= 1 fails, so C_II is undefined."""

    def __init__(self, c1):
        super().__init__(f"C_I = {c1:.6g} > 1: existence threshold C_I <= 1 not met")
        self.c1 = c1


class MeshError(OldroydError, ValueError):
    pass


class LinearSolveFailure(OldroydError):
    pass


class SolverError(OldroydError):
    """Nonlinear iteration failure; carries the partial state and report."""

    def __init__(self, message, state=None, report=None):
        super().__init__(message)
        self.state = state
        self.report = report


class MaxIterExceeded(SolverError):
    pass


class Diverged(SolverError):
    pass


class NoConvergence(OldroydError):
    pass


class SolveFailed(OldroydError):
    pass


class ExpressionError(OldroydError, ValueError):
    pass


class ConfigError(OldroydError, ValueError):
    pass
