"""Exception hierarchy shared by every splashwave module."""

from __future__ import annotations


class SplashwaveError(Exception):
    """Base class for all errors raised by the package."""


class BranchAmbiguity(SplashwaveError):
    """A point lies exactly on the branch cut of the square root."""


class PoleInput(SplashwaveError):
    """tan(w/2) is infinite at the requested point."""


class SingularPointInput(SplashwaveError):
    """A tilde point is within tolerance of one of the excluded points q^0..q^4."""


class BranchTrackingFailure(SplashwaveError):
    """Consecutive curve nodes are too far apart to continue the square-root sign."""


class SelfIntersection(SplashwaveError):
    """Two distinct curve nodes coincide."""


class ArcChordFailure(SplashwaveError):
    """Non-adjacent nodes are too close for the singular quadrature."""


class DegenerateTangent(SplashwaveError):
    """|z_alpha| vanishes (or nearly) somewhere on the curve."""


class NonConvergence(SplashwaveError):
    """An iterative solve did not reach its residual tolerance."""

    def __init__(self, message: str, history: list[float] | None = None):
        super().__init__(message)
        self.history = list(history or [])


class ZeroMeanViolation(SplashwaveError):
    """Data that must integrate to zero over a period does not."""


class NaNDetected(SplashwaveError):
    """A non-finite value appeared in the evolved fields."""


class MismatchedWindow(SplashwaveError):
    """A time window is not uniformly spaced or has inconsistent grids."""


class GridMismatch(SplashwaveError):
    """Two trajectories do not share grid size and sample times."""


class ParseError(SplashwaveError):
    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class SchemaMismatch(SplashwaveError):
    """A snapshot or trajectory file carries an unsupported schema version."""


class IOFailure(SplashwaveError):
    """Reading or writing a trajectory file failed."""
