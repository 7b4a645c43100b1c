"""Time evolution of the interface in the tilde frame.

Two formulations are provided.  ``bhl`` evolves the curve together with the
boundary potential Phi (c = 0), ``omega_form`` evolves the curve together with
the sheet strength omega and a tangential velocity c.  Both share the RK4
stepper, the Krasny filter and the run driver.
"""

from __future__ import annotations

import time as _time
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, Literal

import numpy as np

from . import conformal
from .birkhoff_rott import (
    SheetKernel,
    SolveOptions,
    _tangent,
    phi_alpha_from_omega,
    solve_gauged,
    solve_omega_from_phi,
    omega_from_psi,
    tangential_matrix,
)
from .curve import (
    PeriodicCurve,
    antiderivative,
    fourier_tail,
    grid,
    interpolate,
    krasny_filter,
    spectral_deriv,
)
from ._util import dot
from .errors import (
    ArcChordFailure,
    NaNDetected,
    SingularPointInput,
    SplashwaveError,
)

Formulation = Literal["bhl", "omega_form"]
ABORT_GAP = 1e-6


# ---------------------------------------------------------------- metrics


class ConformalMetric:
    """Metric factors of the tilde frame: Q^2, grad Q, height P2^{-1}."""

    name = "conformal"

    def q2(self, z):
        return conformal.q_squared(z)

    def grad_q(self, z):
        return conformal.grad_q(z)

    def height(self, z):
        return conformal.p2_inverse(z)

    def grad_height(self, z):
        return conformal.grad_p2_inverse(z)


class IdentityMetric:
    """Q = 1 and height = Im z: the untransformed equations (test hook)."""

    name = "identity"

    def q2(self, z):
        return np.ones(np.shape(z))

    def grad_q(self, z):
        return np.zeros(np.shape(z), dtype=complex)

    def height(self, z):
        return np.asarray(z).imag.copy()

    def grad_height(self, z):
        return np.full(np.shape(z), 1j)


def default_metric(curve: PeriodicCurve):
    return IdentityMetric() if curve.physical else ConformalMetric()


# ------------------------------------------------------------------ state


@dataclass(frozen=True)
class WaveState:
    """Curve plus its velocity datum: Phi (bhl) or omega (omega_form)."""

    curve: PeriodicCurve
    field: np.ndarray
    time: float = 0.0
    formulation: Formulation = "bhl"

    def __post_init__(self):
        f = np.asarray(self.field, dtype=float)
        if f.shape != (self.curve.n,):
            raise ValueError("field and curve have different sizes")
        if self.formulation not in ("bhl", "omega_form"):
            raise ValueError(f"unknown formulation {self.formulation!r}")
        object.__setattr__(self, "field", f)

    @property
    def n(self) -> int:
        return self.curve.n

    def advanced(self, dz, dfield, dt: float) -> "WaveState":
        return replace(self, curve=self.curve.with_data(self.curve.data + dt * dz),
                       field=self.field + dt * dfield, time=self.time + dt)


@dataclass(frozen=True)
class RunConfig:
    n: int = 512
    dt: float = 1e-6
    t_final: float = 7e-3
    formulation: Formulation = "bhl"
    filter_threshold: float = 1e-13
    direction: Literal["forward", "reversed"] = "reversed"
    snapshot_stride: int = 500
    solver: SolveOptions = field(default_factory=SolveOptions)
    gauge: Literal["length", "bhl"] = "length"

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.t_final >= 0:
            raise ValueError("t_final must be nonnegative")
        if self.n % 2 or self.n < 16:
            raise ValueError("n must be even and at least 16")
        if self.snapshot_stride < 1:
            raise ValueError("snapshot_stride must be positive")
        if self.direction not in ("forward", "reversed"):
            raise ValueError(f"unknown direction {self.direction!r}")

    @property
    def steps(self) -> int:
        return int(round(self.t_final / self.dt))


# ------------------------------------------------------------- right sides


class _WarmStart:
    """Previous solution, used as the Krylov initial guess."""

    def __init__(self):
        self.omega = None
        self.omega_t = None


def _solve_omega(curve, phi_alpha, opts, warm, kernel):
    x0 = warm.omega if warm is not None else None
    if x0 is not None and x0.shape != phi_alpha.shape:
        x0 = None
    res = solve_omega_from_phi(curve, phi_alpha, opts, x0=x0, kernel=kernel)
    if warm is not None:
        warm.omega = res.omega
    return res.omega


def bhl_fields(state: WaveState, metric=None, opts: SolveOptions | None = None, warm=None):
    """omega, BR and the interface velocity u for a bhl state."""
    curve = state.curve
    metric = metric or default_metric(curve)
    kernel = SheetKernel(curve)
    phi_alpha = spectral_deriv(state.field)
    omega = _solve_omega(curve, phi_alpha, opts or SolveOptions(), warm, kernel)
    za = _tangent(curve)
    b = kernel.velocity(omega)
    u = b + omega * za / (2.0 * np.abs(za) ** 2)
    return omega, b, u


def rhs_bhl(state: WaveState, metric=None, opts: SolveOptions | None = None, warm=None):
    """(z_t, Phi_t) = (Q^2 u, Q^2 |u|^2 / 2 - P2^{-1}(z)) with c = 0."""
    metric = metric or default_metric(state.curve)
    z = state.curve.z
    _, _, u = bhl_fields(state, metric, opts, warm)
    q2 = metric.q2(z)
    return q2 * u, 0.5 * q2 * np.abs(u) ** 2 - metric.height(z)


def _zero_start_primitive(g) -> np.ndarray:
    """int_{-pi}^{alpha} (g - mean g): periodic, zero at alpha = -pi."""
    g = np.asarray(g, dtype=float)
    A = antiderivative(g - np.mean(g))
    return A - A[0]


def tangential_c(curve: PeriodicCurve, omega, metric=None, kernel: SheetKernel | None = None) -> np.ndarray:
    """Tangential velocity keeping |z_alpha| independent of alpha.

    c(alpha) = (alpha + pi)/(2 pi) int G - int_{-pi}^{alpha} G with
    G = (Q^2 BR)_alpha . z_alpha / |z_alpha|^2.
    """
    metric = metric or default_metric(curve)
    kernel = kernel or SheetKernel(curve)
    za = _tangent(curve)
    w = metric.q2(curve.z) * kernel.velocity(omega)
    G = dot(spectral_deriv(w), za) / np.abs(za) ** 2
    return -_zero_start_primitive(G)


def omega_form_terms(state: WaveState, metric=None, gauge: str = "length",
                     kernel: SheetKernel | None = None) -> tuple[dict, np.ndarray, np.ndarray]:
    """Explicit terms of the omega equation, the curve velocity and c.

    The omega_t dependence of d/dt BR . z_alpha is kept on the left; the
    returned terms sum to R with (I + J) omega_t = R.
    """
    curve = state.curve
    metric = metric or default_metric(curve)
    kernel = kernel or SheetKernel(curve)
    omega = state.field
    z = curve.z
    za = _tangent(curve)
    m2 = np.abs(za) ** 2
    b = kernel.velocity(omega)
    q2 = metric.q2(z)
    if gauge == "length":
        c = tangential_c(curve, omega, metric, kernel)
    elif gauge == "bhl":
        c = q2 * omega / (2.0 * m2)
    else:
        raise ValueError(f"unknown gauge {gauge!r}")
    zt = q2 * b + c * za
    dq2 = 2.0 * np.sqrt(q2) * dot(metric.grad_q(z), za)
    terms = {
        "curve_motion": -2.0 * dot(kernel.velocity_variation(omega, zt), za),
        "metric": -np.abs(b) ** 2 * dq2,
        "sheet_pressure": -spectral_deriv(q2 * omega ** 2 / (4.0 * m2)),
        "tangential_br": 2.0 * c * dot(spectral_deriv(b), za),
        "tangential_transport": spectral_deriv(c * omega),
        "gravity": -2.0 * dot(metric.grad_height(z), za),
    }
    return terms, zt, c


def rhs_omega_form(state: WaveState, metric=None, opts: SolveOptions | None = None,
                   gauge: str = "length", warm=None):
    """(z_t, omega_t) with z_t = Q^2 BR + c z_alpha and omega_t from the implicit solve."""
    curve = state.curve
    kernel = SheetKernel(curve)
    terms, zt, _ = omega_form_terms(state, metric, gauge, kernel)
    rhs = sum(terms.values())
    M = tangential_matrix(kernel, _tangent(curve))
    x0 = warm.omega_t if warm is not None else None
    if x0 is not None and x0.shape != rhs.shape:
        x0 = None
    res = solve_gauged(M, rhs, opts or SolveOptions(), gauge=not curve.physical, x0=x0)
    if warm is not None:
        warm.omega_t = res.omega
    return zt, res.omega


# --------------------------------------------------------------- stepping


RHS = Callable[[WaveState], tuple[np.ndarray, np.ndarray]]


class Integrator:
    """RK4 stepper for one formulation, holding warm starts between calls."""

    def __init__(self, formulation: Formulation = "bhl", metric=None, opts: SolveOptions | None = None,
                 filter_threshold: float = 1e-13, gauge: str = "length"):
        self.formulation = formulation
        self.metric = metric
        self.opts = opts or SolveOptions()
        self.filter_threshold = filter_threshold
        self.gauge = gauge
        self.warm = _WarmStart()

    def rhs(self, state: WaveState):
        if state.formulation == "bhl":
            return rhs_bhl(state, self.metric, self.opts, self.warm)
        return rhs_omega_form(state, self.metric, self.opts, self.gauge, self.warm)

    def step(self, state: WaveState, dt: float) -> WaveState:
        return step_rk4(state, dt, self.rhs, self.filter_threshold)


def step_rk4(state: WaveState, dt: float, rhs: RHS | None = None, filter_threshold: float = 1e-13) -> WaveState:
    """Classical RK4 step followed by the Krasny filter on curve and field."""
    rhs = rhs or Integrator(state.formulation).rhs

    def stage(st):
        dz, df = rhs(st)
        if not (np.all(np.isfinite(dz)) and np.all(np.isfinite(df))):
            raise NaNDetected(f"non-finite right-hand side near t = {st.time:.6g}")
        return dz, df

    k1 = stage(state)
    k2 = stage(state.advanced(*k1, 0.5 * dt))
    k3 = stage(state.advanced(*k2, 0.5 * dt))
    k4 = stage(state.advanced(*k3, dt))
    dz = (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]) / 6.0
    df = (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]) / 6.0
    data = state.curve.data + dt * dz
    fld = state.field + dt * df
    if not (np.all(np.isfinite(data)) and np.all(np.isfinite(fld))):
        raise NaNDetected(f"non-finite values at t = {state.time + dt:.6g}")
    data = krasny_filter(data, filter_threshold)
    fld = krasny_filter(fld, filter_threshold)
    return replace(state, curve=state.curve.with_data(data), field=fld, time=state.time + dt)


def reverse_time(state: WaveState) -> WaveState:
    """Negate the velocity datum so that forward integration runs backwards."""
    return replace(state, field=-state.field)


# ---------------------------------------------------------- initial data


def initial_state(curve: PeriodicCurve, psi_alpha, formulation: Formulation = "bhl",
                  opts: SolveOptions | None = None) -> WaveState:
    """Tilde-frame state from a curve and its normal data Psi_alpha.

    A physical curve is mapped with the continued root first.  Psi_alpha is
    the same in both frames, so omega solves the normal equation directly on
    the tilde contour.
    """
    if curve.physical:
        curve = conformal.map_curve(curve, "to_tilde")
    psi_alpha = np.asarray(psi_alpha, dtype=float)
    psi_alpha = psi_alpha - np.mean(psi_alpha)
    omega = omega_from_psi(curve, psi_alpha, opts)
    if formulation == "omega_form":
        return WaveState(curve, omega, 0.0, "omega_form")
    pa = phi_alpha_from_omega(curve, omega)
    return WaveState(curve, antiderivative(pa - np.mean(pa)), 0.0, "bhl")


def state_omega(state: WaveState, opts: SolveOptions | None = None) -> np.ndarray:
    if state.formulation == "omega_form":
        return state.field
    return solve_omega_from_phi(state.curve, spectral_deriv(state.field), opts).omega


def state_phi(state: WaveState) -> np.ndarray:
    if state.formulation == "bhl":
        return state.field
    pa = phi_alpha_from_omega(state.curve, state.field)
    return antiderivative(pa - np.mean(pa))


def convert(state: WaveState, formulation: Formulation, opts: SolveOptions | None = None) -> WaveState:
    """Same physical state expressed in the other formulation."""
    if formulation == state.formulation:
        return state
    fld = state_omega(state, opts) if formulation == "omega_form" else state_phi(state)
    return WaveState(state.curve, fld, state.time, formulation)


def arclength_reparametrize(curve: PeriodicCurve, field_=None, iterations: int = 3):
    """Resample so that |z_alpha| is constant; scalar fields follow the nodes.

    Repeated interpolation converges spectrally for smooth curves.
    """
    a = grid(curve.n)
    cur, f = curve, None if field_ is None else np.asarray(field_, dtype=float)
    for _ in range(iterations):
        s = np.abs(cur.derivative())
        per = _zero_start_primitive(s)
        mean = np.mean(s)
        # nodes x with int_{-pi}^{x} s = (a + pi) mean, by Newton on the interpolant
        x = a.copy()
        for _ in range(50):
            step = (interpolate(per, x) + mean * (x - a)) / interpolate(s, x)
            x -= step
            if np.max(np.abs(step)) < 1e-15:
                break
        pts = interpolate(cur.data, x)
        if cur.physical:
            pts = pts + x
            cur = PeriodicCurve.from_points(pts, cur.kind)
        else:
            cur = PeriodicCurve(pts, cur.kind)
        if f is not None:
            f = interpolate(f, x)
    return (cur, f) if field_ is not None else cur


def is_graph(curve: PeriodicCurve) -> bool:
    """Physical curve with z1 strictly increasing, including across the period."""
    if not curve.physical:
        raise ValueError("graph test needs a physical curve")
    x = curve.z.real
    dx = np.diff(np.append(x, x[0] + 2.0 * np.pi))
    return bool(np.all(dx > 0))


def physical_curve(state: WaveState) -> PeriodicCurve:
    return conformal.map_curve(state.curve, "from_tilde")


# ----------------------------------------------------------------- driver


@dataclass(frozen=True)
class StepRecord:
    step: int
    time: float
    fourier_tail: float
    arc_chord: float
    min_q_distance: float
    min_gap: float


@dataclass(frozen=True)
class Snapshot:
    step: int
    state: WaveState
    record: StepRecord
    cause: str | None = None


@dataclass
class Trajectory:
    config: RunConfig
    snapshots: list[Snapshot] = field(default_factory=list)
    records: list[StepRecord] = field(default_factory=list)
    abort_cause: str | None = None
    wall_time: float = 0.0

    @property
    def final(self) -> Snapshot:
        return self.snapshots[-1]

    @property
    def completed(self) -> bool:
        return self.abort_cause is None

    def times(self) -> np.ndarray:
        return np.array([s.state.time for s in self.snapshots])


@lru_cache(maxsize=8)
def _pair_masks(n: int):
    idx = np.arange(n)
    g = np.abs(idx[:, None] - idx[None, :])
    g = np.minimum(g, n - g)
    beta2 = np.where(g > 0, (2.0 * np.pi * g / n) ** 2, 0.0)
    return beta2, g > 0, g > n // 16


def step_record(state: WaveState, step: int) -> StepRecord:
    """Per-step geometric diagnostics, one pass over the node pairs."""
    curve = state.curve
    z = curve.z
    beta2, off, far = _pair_masks(curve.n)
    dz = z[:, None] - z[None, :]
    d2 = dz.real ** 2 + dz.imag ** 2
    if curve.physical:
        for s in (-2.0 * np.pi, 2.0 * np.pi):
            d2 = np.minimum(d2, (dz.real - s) ** 2 + dz.imag ** 2)
    if np.any(d2[off] == 0.0):
        ac = np.inf
    else:
        ac = float(np.sqrt(np.max(beta2[off] / d2[off])))
    gap = float(np.sqrt(np.min(d2[far])))
    tail = max(fourier_tail(curve.data), fourier_tail(state.field))
    qd = float(np.min(conformal.min_singular_distance(z))) if not curve.physical else np.inf
    return StepRecord(step, float(state.time), tail, ac, qd, gap)


def run(config: RunConfig, initial: WaveState, metric=None,
        on_snapshot: Callable[[Snapshot], None] | None = None, first_step: int = 0) -> Trajectory:
    """Integrate ``initial`` to ``config.t_final`` and collect snapshots.

    Errors raised inside a step end the run; the last good state is stored
    as a final snapshot labelled with the cause.  A resumed run passes the
    step number of its starting snapshot as ``first_step`` and a config whose
    t_final is the remaining time.
    """
    t0 = _time.perf_counter()
    state = initial if initial.formulation == config.formulation else convert(initial, config.formulation, config.solver)
    if config.direction == "reversed":
        state = reverse_time(state)
    integ = Integrator(config.formulation, metric, config.solver, config.filter_threshold, config.gauge)
    traj = Trajectory(config)

    def emit(step, rec, cause=None):
        snap = Snapshot(step, state, rec, cause)
        traj.snapshots.append(snap)
        if on_snapshot is not None:
            on_snapshot(snap)

    rec = step_record(state, first_step)
    traj.records.append(rec)
    emit(first_step, rec)
    cause = None
    for k in range(1, config.steps + 1):
        try:
            state = integ.step(state, config.dt)
            rec = step_record(state, first_step + k)
        except SplashwaveError as exc:
            cause = f"{type(exc).__name__}: {exc}"
            break
        traj.records.append(rec)
        if rec.min_gap < ABORT_GAP:
            cause = f"{ArcChordFailure.__name__}: node gap {rec.min_gap:.3e}"
        elif rec.min_q_distance < ABORT_GAP:
            cause = f"{SingularPointInput.__name__}: distance to q^l {rec.min_q_distance:.3e}"
        if cause is not None:
            break
        if k % config.snapshot_stride == 0 or k == config.steps:
            emit(first_step + k, rec)
    if cause is not None:
        traj.abort_cause = cause
        emit(traj.records[-1].step, traj.records[-1], cause)
    traj.wall_time = _time.perf_counter() - t0
    return traj
