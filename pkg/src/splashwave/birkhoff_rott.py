"""Birkhoff-Rott integral, interface velocity and the two sheet-strength inversions.

Velocities are complex numbers u1 + i u2.  The principal-value integral is
discretised with the alternating-node trapezoidal rule: target node i only
sees sources j with j - i odd, each with weight 2 * (2 pi / n).

For closed contours (the tilde frame, fluid inside) the operators
``I + J`` and ``omega -> BR . z_alpha^perp`` both annihilate the
equilibrium density and map onto mean-zero data.  Those solves fix the
gauge with mean(omega) = 0 by adding the rank-one term 1 * mean(.) to the
operator; the geometry and the fluid-side velocity do not depend on it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy.sparse.linalg import gmres

from ._util import dot
from .curve import PeriodicCurve, grid, spectral_deriv, wavenumbers
from .errors import ArcChordFailure, DegenerateTangent, NonConvergence, ZeroMeanViolation

ARC_CHORD_TOL = 1e-12
TANGENT_TOL = 1e-8


@dataclass(frozen=True)
class SolveOptions:
    max_iterations: int = 400
    residual_tolerance: float = 1e-12
    method: Literal["krylov", "fixed_point", "direct"] = "krylov"

    def __post_init__(self):
        if not self.residual_tolerance > 0:
            raise ValueError("residual_tolerance must be positive")


@dataclass
class SolveResult:
    omega: np.ndarray
    residual: float            # discrete L2 residual of the operator actually solved
    iterations: int
    history: list[float] = field(default_factory=list)


def l2(f) -> float:
    """Discrete L2(-pi, pi) norm."""
    f = np.asarray(f)
    return float(np.sqrt(2.0 * np.pi / f.shape[-1] * np.sum(np.abs(f) ** 2)))


class SheetKernel:
    """Alternating-node quadrature for one curve, reusable across densities."""

    def __init__(self, curve: PeriodicCurve, check: bool = True):
        n = curve.n
        self.n = n
        self.curve = curve
        self.periodic = curve.physical
        z = curve.z
        rows = np.arange(n)[:, None]
        self.src = (rows + 2 * np.arange(n // 2)[None, :] + 1) % n
        # row i holds z[i + 1], z[i + 3], ... without a gather
        ring = np.lib.stride_tricks.sliding_window_view(np.concatenate([z, z]), n)
        diff = z[:, None] - ring[1:n + 1, ::2]
        if check:
            # odd offsets 3..n-3 from the stencil, even offsets 2..n-2 separately
            even = z[:, None] - ring[:n, 2::2]
            floor = (ARC_CHORD_TOL * curve.extent()) ** 2
            for part in (diff[:, 1:-1], even):
                if part.size and (part.real ** 2 + part.imag ** 2).min() < floor:
                    raise ArcChordFailure("non-adjacent nodes nearly coincide")
        self._diff = diff
        if self.periodic:
            self.K = 1.0 / (np.tan(0.5 * diff) * (n * 1j))
        else:
            self.K = 2.0 / (n * 1j * diff)
        self._dense = None

    def conj_velocity(self, omega) -> np.ndarray:
        omega = np.asarray(omega, dtype=float)
        return np.einsum("ij,ij->i", self.K, omega[self.src])

    def velocity(self, omega) -> np.ndarray:
        return np.conj(self.conj_velocity(omega))

    def dense(self) -> np.ndarray:
        """Complex matrix A with conj(BR) = A @ omega."""
        if self._dense is None:
            A = np.zeros((self.n, self.n), dtype=complex)
            A[np.arange(self.n)[:, None], self.src] = self.K
            self._dense = A
        return self._dense

    def scatter(self, weights) -> np.ndarray:
        """Real n x n matrix with Re(weights_i K_ij) at the source columns."""
        out = np.zeros((self.n, self.n))
        out[np.arange(self.n)[:, None], self.src] = (np.asarray(weights)[:, None] * self.K).real
        return out

    def velocity_variation(self, omega, zdot) -> np.ndarray:
        """Derivative of BR(z, omega) when the nodes move with velocity zdot."""
        omega = np.asarray(omega, dtype=float)
        zdot = np.asarray(zdot, dtype=complex)
        d = self._diff
        if self.periodic:
            kp = -0.5 / (np.sin(0.5 * d) ** 2 * (self.n * 1j))
        else:
            kp = -2.0 / (self.n * 1j * d * d)
        dz = zdot[:, None] - zdot[self.src]
        return np.conj(np.einsum("ij,ij->i", kp * dz, omega[self.src]))


def br(curve: PeriodicCurve, omega, kernel: SheetKernel | None = None) -> np.ndarray:
    """Birkhoff-Rott velocity at the nodes (complex)."""
    kernel = kernel or SheetKernel(curve)
    return kernel.velocity(omega)


def br_alpha(curve: PeriodicCurve, omega, kernel: SheetKernel | None = None) -> np.ndarray:
    return spectral_deriv(br(curve, omega, kernel))


def _tangent(curve: PeriodicCurve) -> np.ndarray:
    za = curve.derivative()
    if np.min(np.abs(za)) < TANGENT_TOL:
        raise DegenerateTangent("|z_alpha| below %.0e" % TANGENT_TOL)
    return za


def interface_velocity(curve: PeriodicCurve, omega, kernel: SheetKernel | None = None) -> np.ndarray:
    """Fluid-side limit BR + omega z_alpha / (2 |z_alpha|^2)."""
    za = _tangent(curve)
    omega = np.asarray(omega, dtype=float)
    return br(curve, omega, kernel) + omega * za / (2.0 * np.abs(za) ** 2)


def tangential_matrix(kernel: SheetKernel, z_alpha) -> np.ndarray:
    """Real matrix of I + J with J omega = 2 BR(z, omega) . z_alpha."""
    M = kernel.scatter(2.0 * np.asarray(z_alpha))
    M[np.diag_indices(kernel.n)] += 1.0
    return M


def normal_matrix(kernel: SheetKernel, z_alpha) -> np.ndarray:
    """Real matrix of omega -> BR(z, omega) . z_alpha^perp."""
    return kernel.scatter(1j * np.asarray(z_alpha))


def solve_gauged(M: np.ndarray, rhs, opts: SolveOptions, gauge: bool, x0=None,
                 nyquist: bool = False) -> SolveResult:
    """Solve M omega = rhs; with ``gauge`` the mean of omega is pinned to 0.

    ``nyquist`` also pins the (-1)^j mode, which the alternating-node rule
    cannot see in Hilbert-like operators.
    """
    n = M.shape[0]
    A = M + np.full((n, n), 1.0 / n) if gauge else M.copy()
    if nyquist:
        v = (-1.0) ** np.arange(n)
        A -= np.outer(M @ v, v) / n
        A += np.outer(v, v) / n
    rhs = np.asarray(rhs, dtype=float)
    history: list[float] = []
    scale = np.sqrt(2.0 * np.pi / n)
    tol = opts.residual_tolerance
    iterations = 0
    if opts.method == "direct":
        omega = np.linalg.solve(A, rhs)
    elif opts.method == "fixed_point":
        omega = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
        B = A - np.eye(n)
        for iterations in range(1, opts.max_iterations + 1):
            omega = rhs - B @ omega
            r = l2(A @ omega - rhs)
            history.append(r)
            if r <= 0.5 * tol or not np.isfinite(r):
                break
    else:
        omega = None if x0 is None else np.array(x0, dtype=float)
        # a few restarted passes; each pass starts from the last iterate
        for _ in range(4):
            omega, info = gmres(A, rhs, x0=omega, rtol=0.0, atol=0.25 * tol / scale,
                                restart=min(n, 60), maxiter=max(1, opts.max_iterations // 60),
                                callback=lambda r: history.append(float(r) * scale),
                                callback_type="pr_norm")
            iterations = len(history)
            if l2(A @ omega - rhs) <= tol:
                break
    res = l2(A @ omega - rhs)
    if nyquist:
        omega = omega - v * (v @ omega) / n
    if not np.isfinite(res) or res > tol:
        raise NonConvergence(f"residual {res:.3e} above tolerance {tol:.1e}", history)
    return SolveResult(omega, res, iterations, history)


def _check_zero_mean(f, name: str) -> None:
    f = np.asarray(f, dtype=float)
    if abs(np.mean(f)) * np.sqrt(2 * np.pi) > 1e-10 * max(l2(f), 1e-300):
        raise ZeroMeanViolation(f"{name} must have zero mean")


def solve_omega_from_phi(curve: PeriodicCurve, phi_alpha, opts: SolveOptions | None = None,
                         x0=None, kernel: SheetKernel | None = None) -> SolveResult:
    opts = opts or SolveOptions()
    phi_alpha = np.asarray(phi_alpha, dtype=float)
    _check_zero_mean(phi_alpha, "Phi_alpha")
    kernel = kernel or SheetKernel(curve)
    M = tangential_matrix(kernel, _tangent(curve))
    return solve_gauged(M, 2.0 * phi_alpha, opts, gauge=not curve.physical, x0=x0)


def omega_from_phi(curve: PeriodicCurve, phi_alpha, opts: SolveOptions | None = None, x0=None) -> np.ndarray:
    """Sheet strength from tangential data: (I + J) omega = 2 Phi_alpha."""
    return solve_omega_from_phi(curve, phi_alpha, opts, x0).omega


def tangential_residual(curve: PeriodicCurve, omega, phi_alpha) -> float:
    """|| (I + J) omega - 2 Phi_alpha || recomputed from scratch."""
    za = curve.derivative()
    return l2(omega + 2.0 * dot(br(curve, omega), za) - 2.0 * np.asarray(phi_alpha))


def omega_from_psi(curve: PeriodicCurve, psi_alpha, opts: SolveOptions | None = None, x0=None) -> np.ndarray:
    """Mean-zero sheet strength whose normal velocity is BR . z_alpha^perp = Psi_alpha."""
    opts = opts or SolveOptions()
    psi_alpha = np.asarray(psi_alpha, dtype=float)
    _check_zero_mean(psi_alpha, "Psi_alpha")
    kernel = SheetKernel(curve)
    M = normal_matrix(kernel, _tangent(curve))
    return solve_gauged(M, psi_alpha, opts, gauge=True, x0=x0, nyquist=True).omega


def phi_alpha_from_omega(curve: PeriodicCurve, omega) -> np.ndarray:
    za = curve.derivative()
    return 0.5 * np.asarray(omega) + dot(br(curve, omega), za)


def psi_from_omega(curve: PeriodicCurve, omega) -> np.ndarray:
    """Stream function (1/2pi) int log|z(alpha) - z(beta)| omega(beta) d beta on the curve.

    The kernel is split into log|2 sin((alpha - beta)/2)|, applied exactly as
    a Fourier multiplier, plus a smooth remainder summed with the trapezoidal
    rule.
    """
    omega = np.asarray(omega, dtype=float)
    n = curve.n
    a = grid(n)
    z = curve.z
    da = a[:, None] - a[None, :]
    off = ~np.eye(n, dtype=bool)
    sin_a = np.where(off, np.abs(2.0 * np.sin(0.5 * da)), 1.0)
    if curve.physical:
        chord = np.abs(2.0 * np.sin(0.5 * (z[:, None] - z[None, :])))
    else:
        chord = np.abs(z[:, None] - z[None, :])
    if np.any(chord[off] < ARC_CHORD_TOL * curve.extent()):
        raise ArcChordFailure("non-adjacent nodes nearly coincide")
    L = np.where(off, np.log(np.where(off, chord, 1.0)) - np.log(sin_a), 0.0)
    L[np.diag_indices(n)] = np.log(np.abs(curve.derivative()))
    smooth = (2.0 * np.pi / n) * (L @ omega)
    k = np.abs(wavenumbers(n))
    mult = np.zeros(n)
    mult[k > 0] = -np.pi / k[k > 0]
    singular = np.fft.ifft(np.fft.fft(omega) * mult).real
    return (smooth + singular) / (2.0 * np.pi)
