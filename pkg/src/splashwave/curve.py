"""Periodic spectral toolkit for sampled interfaces.

All fields live on the uniform grid alpha_j = -pi + 2 pi j / n.  Scalar
fields are plain numpy arrays; curves are :class:`PeriodicCurve`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy.optimize import minimize

from ._util import as_complex
from .errors import SelfIntersection

CurveKind = Literal["tilde_closed", "physical_periodic"]
TWO_PI = 2.0 * np.pi


def grid(n: int) -> np.ndarray:
    return -np.pi + TWO_PI * np.arange(n) / n


def wavenumbers(n: int) -> np.ndarray:
    return np.fft.fftfreq(n, 1.0 / n)


@dataclass(frozen=True)
class PeriodicCurve:
    """A 2pi-periodic interface sampled at n nodes.

    ``data`` holds complex samples of the periodic part: the points
    themselves for a closed tilde contour, z - alpha for a physical
    periodic graph-like curve (so z1(alpha + 2pi) = z1(alpha) + 2pi).
    """

    data: np.ndarray
    kind: CurveKind = "tilde_closed"

    def __post_init__(self):
        d = np.asarray(self.data, dtype=complex)
        if d.ndim != 1 or d.size % 2 or d.size < 16:
            raise ValueError("curve needs an even number n >= 16 of samples")
        if not np.all(np.isfinite(d)):
            raise ValueError("curve coordinates must be finite")
        if self.kind not in ("tilde_closed", "physical_periodic"):
            raise ValueError(f"unknown curve kind {self.kind!r}")
        object.__setattr__(self, "data", d)

    @classmethod
    def from_points(cls, z, kind: CurveKind = "tilde_closed") -> "PeriodicCurve":
        z = np.asarray(as_complex(z), dtype=complex)
        if kind == "physical_periodic":
            z = z - grid(z.size)
        return cls(z, kind)

    @property
    def n(self) -> int:
        return self.data.size

    @property
    def alpha(self) -> np.ndarray:
        return grid(self.n)

    @property
    def physical(self) -> bool:
        return self.kind == "physical_periodic"

    @property
    def z(self) -> np.ndarray:
        """Node positions as complex numbers."""
        return self.data + self.alpha if self.physical else self.data

    @property
    def points(self) -> np.ndarray:
        z = self.z
        return np.stack([z.real, z.imag], axis=-1)

    def derivative(self, order: int = 1) -> np.ndarray:
        d = spectral_deriv(self.data, order)
        if self.physical and order == 1:
            d = d + 1.0
        return d

    def with_data(self, data) -> "PeriodicCurve":
        return PeriodicCurve(np.asarray(data, dtype=complex), self.kind)

    def diameter(self) -> float:
        z = self.z
        if self.physical:
            return float(max(np.ptp(z.imag), 1.0) + TWO_PI)
        return float(np.abs(z[:, None] - z[None, :]).max())

    def extent(self) -> float:
        """Bounding-box diagonal; a cheap length scale within sqrt(2) of the diameter."""
        z = self.z
        if self.physical:
            return self.diameter()
        return float(np.hypot(np.ptp(z.real), np.ptp(z.imag)))


def _multiply(f, mult: np.ndarray):
    f = np.asarray(f)
    out = np.fft.ifft(np.fft.fft(f) * mult)
    return out if np.iscomplexobj(f) else out.real


def spectral_deriv(f, order: int = 1):
    """order-th alpha derivative of the trigonometric interpolant.

    For a :class:`PeriodicCurve` the derivative of the node positions is
    returned as a complex array.
    """
    if isinstance(f, PeriodicCurve):
        return f.derivative(order)
    f = np.asarray(f)
    if order == 0:
        return f.copy()
    n = f.shape[-1]
    k = wavenumbers(n)
    mult = (1j * k) ** order
    if order % 2:
        mult[n // 2] = 0.0
    return _multiply(f, mult)


def antiderivative(f):
    """Zero-mean periodic antiderivative of f - mean(f)."""
    f = np.asarray(f)
    n = f.shape[-1]
    k = wavenumbers(n)
    mult = np.zeros(n, dtype=complex)
    nz = k != 0
    mult[nz] = 1.0 / (1j * k[nz])
    mult[n // 2] = 0.0
    return _multiply(f, mult)


def cumulative_integral(f):
    """int_{-pi}^{alpha} f, spectrally exact for trigonometric polynomials."""
    f = np.asarray(f)
    a = antiderivative(f)
    return np.mean(f) * (grid(f.shape[-1]) + np.pi) + a - a[..., :1]


def hilbert(f):
    """Periodic Hilbert transform, multiplier -i sgn(k)."""
    f = np.asarray(f)
    n = f.shape[-1]
    mult = -1j * np.sign(wavenumbers(n))
    mult[n // 2] = 0.0
    return _multiply(f, mult)


def lambda_half(f):
    """Fractional derivative Lambda^(1/2), multiplier |k|^(1/2)."""
    f = np.asarray(f)
    return _multiply(f, np.sqrt(np.abs(wavenumbers(f.shape[-1]))))


def sobolev_norm(f, s: float) -> float:
    """H^s norm normalised so that s = 0 gives the L^2(-pi, pi) norm.

    Curves use both components of their periodic representation.
    """
    data = f.data if isinstance(f, PeriodicCurve) else np.asarray(f)
    comps = [data.real, data.imag] if np.iscomplexobj(data) else [data]
    n = data.shape[-1]
    w = (1.0 + wavenumbers(n) ** 2) ** s
    total = 0.0
    for c in comps:
        fh = np.fft.fft(c) / n
        total += TWO_PI * float(np.sum(w * np.abs(fh) ** 2))
    return float(np.sqrt(total))


def fourier_tail(f, fraction: float = 0.25) -> float:
    """Largest Fourier modulus with |k| > fraction*n, relative to the largest overall."""
    data = f.data if isinstance(f, PeriodicCurve) else np.asarray(f)
    n = data.shape[-1]
    fh = np.abs(np.fft.fft(data)) / n
    top = fh.max()
    if top == 0.0:
        return 0.0
    return float(fh[np.abs(wavenumbers(n)) > fraction * n].max() / top)


def _krasny_real(f: np.ndarray, threshold: float) -> np.ndarray:
    fh = np.fft.rfft(f)
    mod = np.abs(fh)
    cut = threshold * mod.max()
    fh[mod < cut] = 0.0
    return np.fft.irfft(fh, n=f.shape[-1])


def krasny_filter(f, threshold: float = 1e-13):
    """Zero every Fourier mode whose modulus is below threshold * (max modulus).

    Complex arrays and curves are filtered componentwise.
    """
    if threshold <= 0.0:
        return f
    if isinstance(f, PeriodicCurve):
        return f.with_data(krasny_filter(f.data, threshold))
    f = np.asarray(f)
    if np.iscomplexobj(f):
        return _krasny_real(f.real, threshold) + 1j * _krasny_real(f.imag, threshold)
    return _krasny_real(f, threshold)


def resample(f, n: int):
    """Spectral interpolation of a periodic field (or curve) onto n nodes."""
    if isinstance(f, PeriodicCurve):
        return PeriodicCurve(resample(f.data, n), f.kind)
    f = np.asarray(f)
    m = f.shape[-1]
    if m == n:
        return f.copy()
    fh = np.fft.fft(f) / m
    gh = np.zeros(n, dtype=complex)
    half = min(m, n) // 2
    gh[:half] = fh[:half]
    gh[n - half + 1:] = fh[m - half + 1:]
    if m < n:
        gh[half] = gh[n - half] = 0.5 * fh[half]
    else:
        gh[half] = fh[half] + fh[m - half]
    out = np.fft.ifft(gh) * n
    return out if np.iscomplexobj(f) else out.real


def interpolate(f, a):
    """Evaluate the trigonometric interpolant of periodic samples at parameters a."""
    f = np.asarray(f)
    n = f.shape[-1]
    fh = np.fft.fft(f) / n
    k = wavenumbers(n)
    fh = fh.copy()
    if n % 2 == 0:
        fh[n // 2] *= 0.5
        k = np.concatenate([k, [n // 2]])
        fh = np.concatenate([fh, [fh[n // 2]]])
    a = np.asarray(a, dtype=float)
    phase = np.exp(1j * np.multiply.outer(a + np.pi, k))
    out = phase @ fh
    return out if np.iscomplexobj(f) else out.real


def curve_at(curve: PeriodicCurve, a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    out = interpolate(curve.data, a)
    return out + a if curve.physical else out


# ---------------------------------------------------------------- pairs


def _pair_geometry(curve: PeriodicCurve):
    """Parameter distances and chords for every node pair (i, j)."""
    n = curve.n
    a = curve.alpha
    da = a[:, None] - a[None, :]
    shift = np.round(da / TWO_PI)
    beta = da - TWO_PI * shift
    z = curve.z
    if curve.physical:
        chord = np.abs(z[:, None] - (z[None, :] + TWO_PI * shift))
    else:
        chord = np.abs(z[:, None] - z[None, :])
    idx = np.arange(n)
    gap = np.abs(idx[:, None] - idx[None, :])
    gap = np.minimum(gap, n - gap)
    return np.abs(beta), chord, gap


def arc_chord(curve: PeriodicCurve, exclude=None) -> float:
    """Discrete arc-chord functional max |beta| / |z(alpha) - z(alpha - beta)|.

    ``exclude`` is an optional boolean mask of nodes left out of the sup.
    """
    beta, chord, gap = _pair_geometry(curve)
    mask = gap > 0
    if exclude is not None:
        keep = ~np.asarray(exclude, dtype=bool)
        mask &= keep[:, None] & keep[None, :]
    if np.any(chord[mask] == 0.0):
        raise SelfIntersection("two distinct nodes coincide")
    return float(np.max(beta[mask] / chord[mask]))


def min_pair_gap(curve: PeriodicCurve, band: int | None = None):
    """Smallest node distance among pairs more than ``band`` indices apart.

    Returns (gap, (alpha_i, alpha_j)).  ``band`` defaults to n/16.
    """
    n = curve.n
    band = n // 16 if band is None else band
    z = curve.z
    d = np.abs(z[:, None] - z[None, :])
    if curve.physical:
        for s in (-TWO_PI, TWO_PI):
            d = np.minimum(d, np.abs(z[:, None] - z[None, :] - s))
    idx = np.arange(n)
    g = np.abs(idx[:, None] - idx[None, :])
    g = np.minimum(g, n - g)
    d = np.where(g > band, d, np.inf)
    i, j = np.unravel_index(np.argmin(d), d.shape)
    i, j = sorted((int(i), int(j)))
    a = curve.alpha
    return float(d[i, j]), (float(a[i]), float(a[j]))


# ------------------------------------------------------------ validation


@dataclass
class Clause:
    passed: bool
    detail: dict = field(default_factory=dict)


@dataclass
class ValidationReport:
    clauses: dict[str, Clause]
    intersection: tuple[float, float] | None = None
    branch_note: str = "square-root cut on the rays where i*tan(w/2) <= 0 (through the splash point)"

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.clauses.values())

    def lines(self) -> list[str]:
        out = []
        for name, c in self.clauses.items():
            extra = ", ".join(f"{k}={v}" for k, v in c.detail.items())
            out.append(f"{'PASS' if c.passed else 'FAIL'} {name}: {extra}")
        return out


def touching_pairs(curve: PeriodicCurve, rel_tol: float = 1e-8) -> list[tuple[float, float, float]]:
    """Self-contact points found by refining local minima of the pair distance.

    Returns (alpha_1, alpha_2, distance) per distinct contact.
    """
    n = curve.n
    z = curve.z
    diam = curve.diameter()
    d = np.abs(z[:, None] - z[None, :])
    if curve.physical:
        for s in (-TWO_PI, TWO_PI):
            d = np.minimum(d, np.abs(z[:, None] - z[None, :] - s))
    idx = np.arange(n)
    g = np.abs(idx[:, None] - idx[None, :])
    g = np.minimum(g, n - g)
    d = np.where(g > n // 16, d, np.inf)
    local = np.ones_like(d, dtype=bool)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di or dj:
                local &= d <= np.roll(np.roll(d, di, 0), dj, 1)
    cand = np.argwhere(local & (d < 0.05 * diam) & (idx[:, None] < idx[None, :]))

    def dist(p):
        za, zb = curve_at(curve, p[:1])[0], curve_at(curve, p[1:])[0]
        diff = za - zb
        if curve.physical:
            diff = min((diff - s for s in (-TWO_PI, 0.0, TWO_PI)), key=abs)
        return abs(diff)

    a = curve.alpha
    found: list[tuple[float, float, float]] = []
    for i, j in cand:
        p0 = np.array([a[i], a[j]])
        if d[i, j] < rel_tol * diam:
            best, val = p0, d[i, j]
        else:
            h = TWO_PI / n
            res = minimize(dist, p0, method="L-BFGS-B",
                           bounds=[(p0[0] - 2 * h, p0[0] + 2 * h), (p0[1] - 2 * h, p0[1] + 2 * h)],
                           options={"ftol": 1e-15, "gtol": 1e-13})
            best, val = res.x, res.fun
        if val < rel_tol * diam:
            a1, a2 = sorted(((best[0] + np.pi) % TWO_PI - np.pi, (best[1] + np.pi) % TWO_PI - np.pi))
            if not any(abs(a1 - f[0]) < 1e-3 and abs(a2 - f[1]) < 1e-3 for f in found):
                found.append((float(a1), float(a2), float(val)))
    return found


def _signed_area(z: np.ndarray) -> float:
    return 0.5 * float(np.sum(z.real * np.roll(z.imag, -1) - np.roll(z.real, -1) * z.imag))


def validate_splash_curve(curve: PeriodicCurve, branch=None) -> ValidationReport:
    """Check a physical periodic curve against the splash-curve definition."""
    from . import conformal

    if not curve.physical:
        raise ValueError("validate_splash_curve expects a physical_periodic curve")
    branch = conformal.CANONICAL if branch is None else branch
    clauses: dict[str, Clause] = {}
    n = curve.n

    tail = fourier_tail(curve)
    clauses["periodic_smooth"] = Clause(tail < 1e-10, {"fourier_tail": tail})

    touches = touching_pairs(curve)
    zal = np.abs(curve.derivative())
    detail: dict = {"contacts": len(touches)}
    ok = len(touches) == 1
    pair = None
    if touches:
        a1, a2, _ = touches[0]
        pair = (a1, a2)
        za = np.abs(interpolate(curve.derivative(), np.array([a1, a2])))
        detail.update(alpha_1=round(a1, 6), alpha_2=round(a2, 6), tangent_1=float(za[0]), tangent_2=float(za[1]))
        excl = np.abs(((curve.alpha - a1 + np.pi) % TWO_PI) - np.pi) < TWO_PI / 16
        try:
            ac = arc_chord(curve, exclude=excl)
        except SelfIntersection:
            ac = np.inf
        detail["arc_chord_excised"] = ac
        ok = ok and np.isfinite(ac) and ac < 1e6
    clauses["single_splash"] = Clause(bool(ok), detail)

    try:
        zt = conformal.track_branch(curve.z, branch)
        tilde = PeriodicCurve(zt, "tilde_closed")
        ttail = fourier_tail(tilde, 0.4)
        area = _signed_area(zt)
        try:
            tac = arc_chord(tilde)
        except SelfIntersection:
            tac = np.inf
        clauses["water_below_normal_to_vacuum"] = Clause(
            bool(area < 0 and np.all(zal > 0)), {"tilde_signed_area": area})
        clauses["tilde_closed_arc_chord"] = Clause(
            bool(ttail < 1e-6 and np.isfinite(tac) and tac < 1e4), {"fourier_tail": ttail, "arc_chord": tac})
        qd = conformal.min_singular_distance(zt)
        clauses["avoids_singular_points"] = Clause(
            bool(np.all(qd > conformal.SINGULAR_TOL)), {"min_distance": [float(x) for x in qd]})
    except Exception as exc:  # noqa: BLE001 - reported in the clause
        for name in ("water_below_normal_to_vacuum", "tilde_closed_arc_chord", "avoids_singular_points"):
            clauses[name] = Clause(False, {"error": repr(exc)})

    z = curve.z
    heights = []
    for target in (-np.pi, np.pi):
        x = z.real - target
        xs = np.append(x, x[0] + TWO_PI)
        ys = np.append(z.imag, z.imag[0])
        for j in range(n):
            if xs[j] == 0.0:
                heights.append(float(ys[j]))
            elif xs[j] * xs[j + 1] < 0:
                t = xs[j] / (xs[j] - xs[j + 1])
                heights.append(float(ys[j] + t * (ys[j + 1] - ys[j])))
    clauses["passes_below_poles"] = Clause(bool(heights) and max(heights) < 0.0,
                                           {"crossing_heights": heights})
    return ValidationReport(clauses, pair)
