"""Exception types raised across the library."""


class SplineFollowError(Exception):
    """Base class for all library errors."""


class DegenerateChordError(SplineFollowError):
    """Consecutive waypoints coincide, so the chord length is zero."""


class FitFailureError(SplineFollowError):
    """The spline fitting linear system is rank deficient."""

    def __init__(self, message, segment=None):
        super().__init__(message)
        self.segment = segment


class DomainError(SplineFollowError):
    """Parameter lies outside a segment's domain."""


class UnsupportedOrderError(SplineFollowError):
    """Requested derivative order exceeds what the path supports."""


class IrregularCurveError(SplineFollowError):
    """The curve's first derivative vanishes at the query point."""


class DegenerateFrameError(SplineFollowError):
    """Gram-Schmidt collapsed: derivatives are not linearly independent."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class NonConvergenceError(SplineFollowError):
    """Projection descent hit the iteration cap."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class NonSPDInertiaError(SplineFollowError):
    """Inertia matrix failed its positive-definite factorization."""


class SingularityError(SplineFollowError):
    """Output Jacobian (or a derived matrix) lost rank."""


class NearSingularDecouplingError(SplineFollowError):
    """beta * W^-1 * beta^T is too ill-conditioned to invert reliably."""


class DivergenceError(SplineFollowError):
    """Simulated state magnitude exceeded the divergence guard."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class ParameterError(SplineFollowError):
    """A model or configuration parameter is out of its valid range."""
