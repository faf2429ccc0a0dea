"""Exception types shared across the package.

The CLI maps these onto exit codes: usage errors -> 1, budget refusals -> 2,
numerical failures -> 3.
"""


class FKExactError(Exception):
    """Base class for package errors."""


class BudgetExceededError(FKExactError):
    """An enumeration or combinatorial budget would be exceeded."""


class GeometryError(FKExactError):
    """Requested geometry does not fit the graph (bad N, L, box radius...)."""


class NumericalError(FKExactError):
    """Base class for numerical failures that invalidate a result."""


class ZeroDenominatorError(NumericalError):
    """The tilted normalisation phi_p[alpha_z^{|w|}] vanished within tolerance.

    Signals a zero of the complex partition function at p+z.
    """


class PoleProximityError(NumericalError):
    """p+z too close to 1, where the odds-ratio substitution x=(p+z)/(1-p-z) blows up."""


class ZeroXiError(NumericalError):
    """The polymer partition function Xi vanished within tolerance."""


class TiltMismatchError(NumericalError):
    """Tilted-ratio and direct-substitution evaluations disagreed beyond tolerance."""


class CoalescenceCapError(NumericalError):
    """Coupling from the past hit the horizon cap without coalescing.

    Raised instead of returning a biased sample.
    """
