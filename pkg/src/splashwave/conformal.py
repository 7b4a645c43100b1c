"""The map P(w) = (tan(w/2))^(1/2) between the physical and tilde frames.

Points are complex numbers (x + iy).  Real arrays with a trailing axis of
length two are accepted wherever a point is expected.

The square root is cut along the rays where i*tan(w/2) is real and
non-positive.  In the w plane these are {iy : y >= 0} and {pi + iy : y > 0}
(mod 2pi): the vertical ray through a splash located on the axis, and the
vacuum above the poles.  With the canonical sign the map sends deep water
to -exp(-i pi/4).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._util import as_complex
from .errors import BranchAmbiguity, BranchTrackingFailure, PoleInput, SingularPointInput

SQRT2_2 = np.sqrt(2.0) / 2.0
SINGULAR_TOL = 1e-8

#: q^0 .. q^4 as complex numbers.
SINGULAR_POINTS = np.array(
    [0.0, SQRT2_2 + 1j * SQRT2_2, -SQRT2_2 + 1j * SQRT2_2, -SQRT2_2 - 1j * SQRT2_2, SQRT2_2 - 1j * SQRT2_2]
)

_ROT = -np.exp(-0.25j * np.pi)
POLE_TOL = 1e-12


def _canonical(w, on_cut: str = "left"):
    w = np.asarray(w, dtype=complex)
    half = w / 2.0
    # cos(w/2) vanishes only to rounding at w = pi in floating point
    if np.any(np.abs(np.cos(half)) < POLE_TOL) or np.any(~np.isfinite(np.tan(half))):
        raise PoleInput("tan(w/2) is infinite")
    x = 1j * np.tan(half)
    root = np.sqrt(x)
    on = (x.imag == 0.0) & (x.real < 0.0)
    if np.any(on):
        if on_cut == "raise":
            raise BranchAmbiguity("point lies on the square-root cut")
        # limit from Re(w) < 0 approaches the cut from Im(x) < 0
        side = -1.0 if on_cut == "left" else 1.0
        root = np.where(on, side * 1j * np.sqrt(np.abs(x.real)), root)
    return _ROT * root


@dataclass(frozen=True)
class BranchSpec:
    """Square-root sign anchored so that P(reference_point) == anchor_value."""

    reference_point: complex
    anchor_value: complex

    @classmethod
    def canonical(cls) -> "BranchSpec":
        ref = -40j
        return cls(ref, complex(_canonical(ref)))

    @property
    def sign(self) -> float:
        base = complex(_canonical(self.reference_point))
        if abs(base - self.anchor_value) <= abs(base + self.anchor_value):
            return 1.0
        return -1.0


CANONICAL = BranchSpec.canonical()


def map_to_tilde(w, branch: BranchSpec = CANONICAL, on_cut: str = "left"):
    """P(w) on the chosen branch.

    Points exactly on the cut take the limit from the Re(w) < 0 side by
    default (``on_cut="left"``); ``"right"`` takes the other limit and
    ``"raise"`` raises :class:`BranchAmbiguity`.
    """
    w = as_complex(w)
    out = branch.sign * _canonical(w, on_cut)
    return complex(out) if np.ndim(out) == 0 else out


def _check_singular(z, which) -> None:
    d = np.abs(np.asarray(z)[..., None] - SINGULAR_POINTS[list(which)])
    if np.any(d < SINGULAR_TOL):
        raise SingularPointInput("point within %.0e of an excluded point q^l" % SINGULAR_TOL)


def map_from_tilde(z):
    """Inverse map w = 2 arctan(z^2), real part reduced to [-pi, pi)."""
    z = as_complex(z)
    _check_singular(z, range(5))
    w = 2.0 * np.arctan(np.asarray(z, dtype=complex) ** 2)
    re = (w.real + np.pi) % (2.0 * np.pi) - np.pi
    w = re + 1j * w.imag
    return complex(w) if np.ndim(w) == 0 else w


def _f(zc):
    return (1.0 + zc**4) / (4.0 * zc)


def q_squared(z):
    """|dP/dw|^2 expressed in tilde coordinates: |(1 + z^4) / z|^2 / 16."""
    z = np.asarray(as_complex(z), dtype=complex)
    _check_singular(z, [0])
    out = np.abs(_f(z)) ** 2
    return float(out) if out.ndim == 0 else out


def p2_inverse(z):
    """Physical height of the pre-image: ln|(i + z^2) / (i - z^2)|."""
    z = np.asarray(as_complex(z), dtype=complex)
    _check_singular(z, [1, 2, 3, 4])
    z2 = z * z
    out = np.log(np.abs(1j + z2)) - np.log(np.abs(1j - z2))
    return float(out) if out.ndim == 0 else out


def grad_q(z):
    """Gradient of Q = sqrt(q_squared) as a complex number gx + i gy."""
    z = np.asarray(as_complex(z), dtype=complex)
    _check_singular(z, [0])
    f = _f(z)
    fp = (3.0 * z**4 - 1.0) / (4.0 * z * z)
    # for analytic f: grad|f| = f conj(f') / |f|
    out = f * np.conj(fp) / np.abs(f)
    return complex(out) if out.ndim == 0 else out


def grad_p2_inverse(z):
    """Gradient of p2_inverse as a complex number gx + i gy."""
    z = np.asarray(as_complex(z), dtype=complex)
    _check_singular(z, [1, 2, 3, 4])
    hp = -4j * z / (1.0 + z**4)
    out = np.conj(hp)
    return complex(out) if out.ndim == 0 else out


def min_singular_distance(z) -> np.ndarray:
    """min over nodes of |z - q^l| for l = 0..4."""
    z = np.asarray(as_complex(z), dtype=complex).ravel()
    return np.abs(z[:, None] - SINGULAR_POINTS[None, :]).min(axis=0)


def track_branch(z_phys: np.ndarray, branch: BranchSpec = CANONICAL) -> np.ndarray:
    """Map a sampled closed path to the tilde frame keeping the root continuous.

    The first node uses the branch as given; every following node takes the
    sign of P closest to a linear extrapolation of the previous two.
    """
    z_phys = np.asarray(z_phys, dtype=complex)
    raw = map_to_tilde(z_phys, branch)
    out = np.empty_like(raw)
    out[0] = raw[0]
    for j in range(1, raw.size):
        guess = out[j - 1] if j == 1 else 2.0 * out[j - 1] - out[j - 2]
        a, b = abs(raw[j] - guess), abs(-raw[j] - guess)
        if min(a, b) > 0.5 * max(a, b):
            raise BranchTrackingFailure(f"cannot decide the root sign at node {j}")
        out[j] = raw[j] if a <= b else -raw[j]
    return out


def map_curve(curve, direction: str = "to_tilde", branch: BranchSpec = CANONICAL):
    """Map a sampled curve between frames, node by node.

    ``to_tilde`` takes a physical periodic curve to a closed tilde contour
    with the root continued along alpha; ``from_tilde`` inverts and unwraps
    the real part so that z1 - alpha is periodic.
    """
    from .curve import PeriodicCurve

    if direction == "to_tilde":
        if not curve.physical:
            raise ValueError("to_tilde expects a physical_periodic curve")
        z = curve.z
        raw = map_to_tilde(z, branch)
        _check_singular(raw, range(5))
        return PeriodicCurve(track_branch(z, branch), "tilde_closed")
    if direction == "from_tilde":
        if curve.physical:
            raise ValueError("from_tilde expects a tilde_closed curve")
        w = np.asarray(map_from_tilde(curve.z))
        alpha = curve.alpha
        re = np.unwrap(w.real, period=2.0 * np.pi)
        re -= 2.0 * np.pi * np.round(np.mean(re - alpha) / (2.0 * np.pi))
        return PeriodicCurve.from_points(re + 1j * w.imag, "physical_periodic")
    raise ValueError(f"unknown direction {direction!r}")
