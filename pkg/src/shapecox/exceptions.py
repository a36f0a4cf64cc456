"""Exception types raised by the fitting machinery."""


class ShapeCoxError(Exception):
    """Base class for errors raised by this package."""


class NumericalOverflowError(ShapeCoxError):
    """A likelihood, score, or information evaluation was not finite.

    Usually caused by an extreme coefficient vector; callers should rescale
    the data or shrink the step that produced the iterate.
    """


class DegenerateCovariateError(ShapeCoxError):
    """A covariate has fewer than two distinct values and cannot be expanded."""


class ConvergenceError(ShapeCoxError):
    """An iterative solver exhausted its iteration budget.

    Carries the iteration history on the ``trace`` attribute so callers can
    inspect what the solver did before giving up.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace if trace is not None else []


class ProfileError(ShapeCoxError):
    """A profile-likelihood search failed, e.g. the deviance never crossed 1."""
