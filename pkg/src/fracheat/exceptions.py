"""Error types raised across the package."""


class InputError(ValueError):
    """Invalid argument (shape, range or exponent relation)."""


class AccuracyError(ArithmeticError):
    """Numerical target not met.

    ``achieved`` holds the best accuracy reached (digits or relative
    error, see the message) so callers can decide whether to relax.
    """

    def __init__(self, msg, achieved=None):
        super().__init__(msg)
        self.achieved = achieved


class PreconditionError(RuntimeError):
    """An assumption flag required by a check is false."""


class InfeasibleError(ValueError):
    """Constraint system has no feasible point (e.g. a zero row)."""


class NonConvergenceError(RuntimeError):
    """Iteration cap reached; ``best`` carries the last iterate."""

    def __init__(self, msg, best=None):
        super().__init__(msg)
        self.best = best
