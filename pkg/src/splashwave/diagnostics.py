"""Functionals evaluated on computed trajectories.

Time derivatives are second-order finite differences over a window of
uniformly spaced states: centered in the middle, one-sided at the ends.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from .birkhoff_rott import SheetKernel, _tangent, l2
from .conformal import min_singular_distance
from .curve import (
    PeriodicCurve,
    arc_chord,
    lambda_half,
    min_pair_gap,
    resample,
    sobolev_norm,
    spectral_deriv,
)
from ._util import dot, perp
from .errors import GridMismatch, MismatchedWindow
from .evolution import (
    Integrator,
    WaveState,
    _zero_start_primitive,
    default_metric,
    state_omega,
    tangential_c,
)

WINDOW_RTOL = 1e-9


# ----------------------------------------------------------------- helpers


def _window_times(window: Sequence[WaveState]) -> float:
    if len(window) != 3:
        raise MismatchedWindow("need exactly three states")
    n = window[0].n
    if any(s.n != n for s in window):
        raise MismatchedWindow("states have different resolutions")
    t = np.array([s.time for s in window])
    h = t[1] - t[0]
    if not h > 0 or abs((t[2] - t[1]) - h) > WINDOW_RTOL * max(abs(h), 1e-300) + 1e-15 * np.max(np.abs(t)):
        raise MismatchedWindow("window times are not uniformly spaced")
    return float(h)


def _ddt(values, h: float, at: int):
    """Second-order derivative of three uniformly spaced samples at index ``at``."""
    a, b, c = values
    if at == 1:
        return (c - a) / (2.0 * h)
    if at == 0:
        return (-3.0 * a + 4.0 * b - c) / (2.0 * h)
    if at == 2:
        return (a - 4.0 * b + 3.0 * c) / (2.0 * h)
    raise ValueError("at must be 0, 1 or 2")


def _quad(f) -> float:
    f = np.asarray(f)
    return float(2.0 * np.pi / f.shape[-1] * np.sum(f))


# ------------------------------------------------------------------ fields


def varphi(curve: PeriodicCurve, omega, c_tilde, metric=None) -> np.ndarray:
    """phi = Q^2 omega / (2 |z_alpha|) - c |z_alpha|."""
    metric = metric or default_metric(curve)
    s = np.abs(_tangent(curve))
    return metric.q2(curve.z) * np.asarray(omega) / (2.0 * s) - np.asarray(c_tilde) * s


def trajectory_c(state: WaveState, omega, gauge: str = "length", metric=None) -> np.ndarray:
    """Tangential velocity c with which the state's parametrization moves.

    A bhl state moves with the fluid (c = Q^2 omega / (2|z_alpha|^2)); an
    omega_form state moves with the gauge it was integrated in.
    """
    curve = state.curve
    metric = metric or default_metric(curve)
    if state.formulation == "bhl" or gauge == "bhl":
        return metric.q2(curve.z) * omega / (2.0 * np.abs(_tangent(curve)) ** 2)
    return tangential_c(curve, omega, metric)


def rayleigh_taylor_sigma(window: Sequence[WaveState], at: int = 1, metric=None,
                          gauge: str = "length", omegas=None) -> np.ndarray:
    """Rayleigh-Taylor function sigma_z at ``window[at]``.

    BR_t and z_alpha_t are finite differences across the window; the
    convective factor phi/|z_alpha| uses the parametrization velocity of the
    trajectory, so it vanishes for bhl runs.
    """
    h = _window_times(window)
    metric = metric or default_metric(window[0].curve)
    if omegas is None:
        omegas = [state_omega(s) for s in window]
    kernels = [SheetKernel(s.curve) for s in window]
    brs = [k.velocity(w) for k, w in zip(kernels, omegas)]
    zas = [_tangent(s.curve) for s in window]
    st, om, b, za = window[at], omegas[at], brs[at], zas[at]
    z = st.curve.z
    s = np.abs(za)
    nrm = perp(za)
    c = trajectory_c(st, om, gauge, metric)
    conv = varphi(st.curve, om, c, metric) / s
    br_t = _ddt(brs, h, at)
    za_t = _ddt(zas, h, at)
    zaa = st.curve.derivative(2)
    u = b + om * za / (2.0 * s ** 2)
    q = np.sqrt(metric.q2(z))
    return (dot(br_t + conv * spectral_deriv(b), nrm)
            + om / (2.0 * s ** 2) * dot(za_t + conv * zaa, nrm)
            + q * np.abs(u) ** 2 * dot(metric.grad_q(z), nrm)
            + dot(metric.grad_height(z), nrm))


def local_window(state: WaveState, dt: float, integrator=None) -> list[WaveState]:
    """Three states [s, s + dt, s + 2 dt] obtained by stepping ``state``.

    Used when stored snapshots are too far apart for time differences;
    evaluate at index 0.
    """
    integ = integrator or Integrator(state.formulation)
    s1 = integ.step(state, dt)
    return [state, s1, integ.step(s1, dt)]


# ------------------------------------------------------------------ energy


@dataclass(frozen=True)
class EnergySnapshot:
    time: float
    h3_z: float
    weighted_h4_term: float
    arc_chord_sq: float
    h2_omega: float
    h3half_varphi: float
    tangent_over_rt: float
    inv_qdist: tuple[float, ...]
    min_q2_sigma: float
    negative_rayleigh_taylor: bool = False

    @property
    def total(self) -> float:
        return (self.h3_z + self.weighted_h4_term + self.arc_chord_sq + self.h2_omega
                + self.h3half_varphi + self.tangent_over_rt + float(sum(self.inv_qdist)))

    def components(self) -> dict[str, float]:
        out = {k: getattr(self, k) for k in ("h3_z", "weighted_h4_term", "arc_chord_sq", "h2_omega",
                                                "h3half_varphi", "tangent_over_rt")}
        for l, v in enumerate(self.inv_qdist):
            out[f"inv_qdist_{l}"] = v
        return out


def h3half_norm_sq(f) -> float:
    """||f||^2_{H^3} + ||Lambda^{1/2} d^3 f||^2_{L^2}."""
    return sobolev_norm(f, 3) ** 2 + l2(lambda_half(spectral_deriv(f, 3))) ** 2


def energy(window: Sequence[WaveState], at: int = 1, metric=None, gauge: str = "length") -> EnergySnapshot:
    """Seven-term energy E(t) at ``window[at]``.

    phi uses the length-preserving c evaluated on the instantaneous state.
    If min Q^2 sigma <= 0 the terms that need it are +inf and flagged.
    """
    st = window[at]
    curve = st.curve
    metric = metric or default_metric(curve)
    omegas = [state_omega(s) for s in window]
    om = omegas[at]
    sigma = rayleigh_taylor_sigma(window, at, metric, gauge, omegas)
    q2 = metric.q2(curve.z)
    q2s = q2 * sigma
    m = float(np.min(q2s))
    za = _tangent(curve)
    d4 = curve.derivative(4)
    negative = not m > 0
    if negative:
        weighted = tangent = np.inf
    else:
        weighted = _quad(q2s / np.abs(za) ** 2 * np.abs(d4) ** 2)
        tangent = float(np.max(np.abs(za)) ** 2 / m)
    phi = varphi(curve, om, tangential_c(curve, om, metric), metric)
    qd = tuple(float(1.0 / d) for d in min_singular_distance(curve.z)) if not curve.physical else ()
    return EnergySnapshot(
        time=st.time,
        h3_z=sobolev_norm(curve, 3) ** 2,
        weighted_h4_term=weighted,
        arc_chord_sq=arc_chord(curve) ** 2,
        h2_omega=sobolev_norm(om, 2) ** 2,
        h3half_varphi=h3half_norm_sq(phi),
        tangent_over_rt=tangent,
        inv_qdist=qd,
        min_q2_sigma=m,
        negative_rayleigh_taylor=negative,
    )


def energy_series(states: Sequence[WaveState], metric=None, gauge: str = "length") -> list[EnergySnapshot]:
    """E(t) at every state of a uniformly spaced sequence (length >= 3)."""
    return [energy(*_window_for(states, i), metric=metric, gauge=gauge) for i in range(len(states))]


def _window_for(states: Sequence[WaveState], i: int):
    m = len(states)
    if m < 3:
        raise MismatchedWindow("need at least three states")
    lo = min(max(i - 1, 0), m - 3)
    return states[lo:lo + 3], i - lo


# ------------------------------------------------------ b terms, residuals


def b_terms(x_curve: PeriodicCurve, gamma, f_field=None, metric=None):
    """(b, b_s, b_e): tangential velocity split into the BR part and the forcing part.

    Both are (alpha + pi)/(2 pi) int G - int_{-pi}^{alpha} G, with
    G = (Q^2 BR)_alpha . x_alpha / |x_alpha|^2 for b_s and
    G = f_alpha . x_alpha / |x_alpha|^2 for b_e.
    """
    b_s = tangential_c(x_curve, gamma, metric)
    if f_field is None:
        b_e = np.zeros(x_curve.n)
    else:
        xa = _tangent(x_curve)
        G = dot(spectral_deriv(np.asarray(f_field, dtype=complex)), xa) / np.abs(xa) ** 2
        b_e = -_zero_start_primitive(G)
    return b_s + b_e, b_s, b_e


def _solve_forcing(curve: PeriodicCurve, r0: np.ndarray) -> np.ndarray:
    """f with f + b_e(f) x_alpha = r0 (b_e is linear in f)."""
    n = curve.n
    xa = _tangent(curve)

    def apply(v):
        f = v[:n] + 1j * v[n:]
        out = f + b_terms_e(curve, f, xa) * xa
        return np.concatenate([out.real, out.imag])

    op = LinearOperator((2 * n, 2 * n), matvec=apply, dtype=float)
    rhs = np.concatenate([r0.real, r0.imag])
    scale = max(np.max(np.abs(rhs)), 1e-300)
    sol, _ = gmres(op, rhs / scale, rtol=1e-13, atol=0.0, restart=min(2 * n, 80), maxiter=20)
    return (sol[:n] + 1j * sol[n:]) * scale


def b_terms_e(curve: PeriodicCurve, f, xa=None) -> np.ndarray:
    xa = _tangent(curve) if xa is None else xa
    G = dot(spectral_deriv(np.asarray(f, dtype=complex)), xa) / np.abs(xa) ** 2
    return -_zero_start_primitive(G)


@dataclass(frozen=True)
class ResidualRecord:
    time: float
    f: np.ndarray
    g: np.ndarray
    b: np.ndarray
    b_s: np.ndarray
    b_e: np.ndarray

    @property
    def f_norm(self) -> float:
        return sobolev_norm(self.f, 5.5)

    @property
    def g_norm(self) -> float:
        return sobolev_norm(self.g, 3.5)

    def delta(self, k: int = 2) -> float:
        s = self.f_norm + self.g_norm
        return float(s ** k + s ** 2)


def residuals(states: Sequence[WaveState], metric=None) -> list[ResidualRecord]:
    """Defects f, g of an approximate trajectory (x, gamma) at its interior times.

    f = x_t - Q^2 BR(x, gamma) - b x_alpha with b = b_s + b_e(f), and g is
    the defect of the gamma equation; x_t, gamma_t and BR_t are centered
    differences.
    """
    if len(states) < 3:
        raise MismatchedWindow("need at least three states")
    metric = metric or default_metric(states[0].curve)
    gammas = [state_omega(s) for s in states]
    kernels = [SheetKernel(s.curve) for s in states]
    brs = [k.velocity(g) for k, g in zip(kernels, gammas)]
    out = []
    for i in range(1, len(states) - 1):
        win = states[i - 1:i + 2]
        h = _window_times(win)
        x = states[i].curve
        z = x.z
        gam = gammas[i]
        b_br = brs[i]
        xa = _tangent(x)
        m2 = np.abs(xa) ** 2
        q2 = metric.q2(z)
        x_t = (states[i + 1].curve.data - states[i - 1].curve.data) / (2.0 * h)
        g_t = (gammas[i + 1] - gammas[i - 1]) / (2.0 * h)
        br_t = (brs[i + 1] - brs[i - 1]) / (2.0 * h)
        _, b_s, _ = b_terms(x, gam, None, metric)
        r0 = x_t - q2 * b_br - b_s * xa
        f = _solve_forcing(x, r0)
        b_e = b_terms_e(x, f, xa)
        b = b_s + b_e
        dq2 = 2.0 * np.sqrt(q2) * dot(metric.grad_q(z), xa)
        g = (g_t + 2.0 * dot(br_t, xa) + dq2 * np.abs(b_br) ** 2
             - 2.0 * b * dot(spectral_deriv(b_br), xa) - spectral_deriv(b * gam)
             + spectral_deriv(q2 * gam ** 2 / (4.0 * m2))
             + 2.0 * dot(metric.grad_height(z), xa))
        out.append(ResidualRecord(states[i].time, f, g, b, b_s, b_e))
    return out


# --------------------------------------------------------------- stability


@dataclass(frozen=True)
class StabilityRecord:
    time: float
    D: np.ndarray
    d: np.ndarray
    Dphi: np.ndarray
    energy: float
    terms: dict = field(default_factory=dict)


def _resampled(state: WaveState, n: int) -> tuple[PeriodicCurve, np.ndarray]:
    om = state_omega(state)
    if state.n == n:
        return state.curve, om
    return resample(state.curve, n), resample(om, n)


def stability_energy(reference: Sequence[WaveState], perturbed: Sequence[WaveState],
                     window: slice | None = None, metric=None,
                     sigma_dt: float | None = None) -> list[StabilityRecord]:
    """Distance functional between a reference run and an approximate run.

    The weight Q^2 sigma / |z_alpha|^2 comes from the reference run, using
    neighbouring samples as the time window, or fresh steps of size
    ``sigma_dt`` when given.  An approximate run at a different resolution is
    resampled spectrally onto the reference grid.
    """
    if len(reference) != len(perturbed):
        raise GridMismatch("runs have different numbers of samples")
    tr = np.array([s.time for s in reference])
    tp = np.array([s.time for s in perturbed])
    if np.any(np.abs(tr - tp) > 1e-12 * max(1.0, float(np.max(np.abs(tr))))):
        raise GridMismatch("runs are sampled at different times")
    idx = range(len(reference))[window or slice(None)]
    n = reference[0].n
    metric = metric or default_metric(reference[0].curve)
    out = []
    for i in idx:
        if sigma_dt is None:
            win, at = _window_for(reference, i)
        else:
            win, at = local_window(reference[i], sigma_dt), 0
        sigma = rayleigh_taylor_sigma(win, at, metric)
        z = reference[i].curve
        om = state_omega(reference[i])
        x, gam = _resampled(perturbed[i], n)
        weight = metric.q2(z.z) * sigma / np.abs(_tangent(z)) ** 2
        phi = varphi(z, om, tangential_c(z, om, metric), metric)
        zeta = varphi(x, gam, tangential_c(x, gam, metric), metric)
        D = z.data - x.data
        d = om - gam
        Dphi = phi - zeta
        terms = {
            "h3_D": sobolev_norm(D, 3) ** 2,
            "weighted_h4_D": _quad(weight * np.abs(spectral_deriv(D, 4)) ** 2),
            "h2_d": sobolev_norm(d, 2) ** 2,
            "h3half_Dphi": h3half_norm_sq(Dphi),
        }
        out.append(StabilityRecord(reference[i].time, D, d, Dphi, float(sum(terms.values())), terms))
    return out


@dataclass(frozen=True)
class GronwallFit:
    c1: float
    eps2: float
    max_violation: float
    degenerate: bool = False


def gronwall_fit(E_series, delta_series, dt: float, cap: float = 1e12) -> GronwallFit:
    """Least C1 with |dE/dt| <= C1 E + eps2 at every interior sample.

    eps2 = max delta (see :func:`delta_from_norms`); dE/dt is the centered
    difference.  Samples with E = 0 and |dE/dt| > eps2 cannot be covered
    and are reported as violations, as is any excess beyond ``cap``.
    """
    E = np.asarray(E_series, dtype=float)
    delta = np.asarray(delta_series, dtype=float)
    if E.size < 3 or delta.size != E.size:
        raise MismatchedWindow("need matching series of length >= 3")
    eps2 = float(np.max(delta)) if delta.size else 0.0
    if np.all(E == 0.0):
        return GronwallFit(0.0, eps2, 0.0, degenerate=True)
    dE = np.abs(E[2:] - E[:-2]) / (2.0 * dt)
    Ei = E[1:-1]
    excess = dE - eps2
    viol = 0.0
    c1 = 0.0
    pos = Ei > 0
    if np.any(pos):
        c1 = max(0.0, float(np.max(excess[pos] / Ei[pos])))
    if np.any(~pos):
        viol = max(0.0, float(np.max(excess[~pos])))
    if c1 > cap:
        viol = max(viol, float(np.max(excess - cap * Ei)))
        c1 = cap
    return GronwallFit(c1, eps2, viol)


def delta_from_norms(f_norms, g_norms, k: int = 2) -> np.ndarray:
    """delta = (|f| + |g|)^k + (|f| + |g|)^2 with the H^5.5 and H^3.5 norms."""
    s = np.asarray(f_norms, dtype=float) + np.asarray(g_norms, dtype=float)
    return s ** k + s ** 2


# ---------------------------------------------------------- curve monitors


def splash_detect(curve: PeriodicCurve):
    """Closest node pair more than n/16 indices apart: (gap, (alpha_i, alpha_j))."""
    return min_pair_gap(curve)


def analyticity_radius(f, floor: float = 1e-13) -> float:
    """Exponential decay rate of the spectrum over the band [n/8, 3n/8].

    Returns 0 when fewer than three modes in the band sit above
    ``floor`` times the largest mode (no decay left to measure).
    """
    data = f.data if isinstance(f, PeriodicCurve) else np.asarray(f)
    n = data.shape[-1]
    comps = [data.real, data.imag] if np.iscomplexobj(data) else [data]
    amp = np.zeros(n // 2 + 1)
    for c in comps:
        amp += np.abs(np.fft.rfft(c) / n) ** 2
    amp = np.sqrt(amp)
    top = amp.max()
    if top == 0.0:
        return 0.0
    k = np.arange(n // 2 + 1)
    band = (k >= n // 8) & (k <= 3 * n // 8) & (amp > floor * top)
    if np.count_nonzero(band) < 3:
        return 0.0
    slope = np.polyfit(k[band], np.log(amp[band]), 1)[0]
    return float(max(-slope, 0.0))
