"""Exception and warning types."""


class DimensionError(ValueError):
    """Array shapes are inconsistent with an operation."""


class UnsupportedError(TypeError):
    """A proximal map or block subproblem cannot be evaluated."""


class DivergenceError(RuntimeError):
    """Objective became non-finite or exploded during a run.

    ``last_iterate`` holds the last iterate with a finite objective and
    ``trace`` the records collected up to that point.
    """

    def __init__(self, message, last_iterate=None, trace=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.trace = trace


class ConvergenceWarning(UserWarning):
    """An iterative routine hit its iteration cap."""


class ParameterWarning(UserWarning):
    """Solver parameters fail the sufficient-decrease conditions."""
