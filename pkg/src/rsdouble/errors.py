"""Exception types shared across the package."""


class RsDoubleError(Exception):
    """Base class for every numeric error raised by this package."""


class NotHermitian(RsDoubleError):
    """Input matrix fails the Hermitian symmetry check."""


class NotPositiveDefinite(RsDoubleError):
    """A factorization pivot came out non-positive."""


class Singular(RsDoubleError):
    """Matrix is singular (or too ill-conditioned to factor reliably)."""


class NoConvergence(RsDoubleError):
    """An eigensolver or matrix function failed its residual check."""


class DegenerateAlcove(RsDoubleError):
    """Torus angles collide: the point is not regular.

    ``at_time`` carries the offending trajectory time when raised by a flow
    engine, and ``partial`` the samples completed before the collision.
    """

    def __init__(self, message, at_time=None, partial=None):
        super().__init__(message)
        self.at_time = at_time
        self.partial = partial


class ConstraintViolated(RsDoubleError):
    """Input point does not satisfy the moment-map constraint."""


class StepUnstable(RsDoubleError):
    """Fixed-step integration lost energy conservation beyond the safety cap."""
