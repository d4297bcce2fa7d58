"""Exception types shared across the package."""


class JordanMatingError(Exception):
    """Base class for all package-specific errors."""


class NonConvergence(JordanMatingError):
    """A Newton or fixed-point iteration ran out of iterations.

    Carries the best iterate seen so that callers can report diagnostics.
    """

    def __init__(self, message, best=None, residual=None, iterations=None):
        super().__init__(message)
        self.best = best
        self.residual = residual
        self.iterations = iterations


class SingularJacobian(JordanMatingError):
    """The finite-difference Jacobian was numerically singular."""


class NotPostcriticallyFinite(JordanMatingError):
    """No critical orbit revisit was found within the step budget."""

    def __init__(self, message, max_steps=None):
        super().__init__(message)
        self.max_steps = max_steps


class MalformedMerge(JordanMatingError):
    """Portraits cannot be merged: Riemann-Hurwitz budgets disagree."""

    def __init__(self, message, budget_expected=None, budget_actual=None):
        super().__init__(message)
        self.budget_expected = budget_expected
        self.budget_actual = budget_actual


class OutsideBasin(JordanMatingError):
    """The point does not converge to the chart's center."""


class PrecisionLoss(JordanMatingError):
    """A chart evaluation or continuation degraded past its tolerance."""

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class NotJordanAtResolution(JordanMatingError):
    """The sampled boundary polygon self-intersects at this resolution."""


class NotHomeomorphismAtResolution(JordanMatingError):
    """The sampled gluing correspondence is not monotone at this resolution."""


class ResolutionExceeded(JordanMatingError):
    """Model evaluation fell deeper into a glued basin than the collar covers."""


class Unsupported(JordanMatingError):
    """The portrait shape has no normal form known to the realizer."""


class NoRealization(JordanMatingError):
    """No Newton seed converged to a map realizing the merged portrait."""

    def __init__(self, message, best_residuals=None):
        super().__init__(message)
        self.best_residuals = best_residuals


class LiftAmbiguous(JordanMatingError):
    """Two preimage branches stayed too close for reliable path lifting."""


class AmbiguousMembership(JordanMatingError):
    """The query point is too close to a region boundary to classify."""


class ConfigError(JordanMatingError):
    """A CLI configuration file is malformed."""
