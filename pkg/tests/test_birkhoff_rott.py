import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from threadpoolctl import threadpool_limits

from splashwave._util import dot
from splashwave.birkhoff_rott import (
    SheetKernel,
    SolveOptions,
    br,
    br_alpha,
    interface_velocity,
    omega_from_phi,
    omega_from_psi,
    phi_alpha_from_omega,
    psi_from_omega,
    solve_omega_from_phi,
    tangential_matrix,
    tangential_residual,
)
from splashwave.conformal import map_curve
from splashwave.curve import PeriodicCurve, grid, spectral_deriv
from splashwave.errors import ArcChordFailure, DegenerateTangent, NonConvergence, ZeroMeanViolation
from splashwave.presets import preset_paper_splash


def circle(n, clockwise=False):
    return PeriodicCurve(np.exp((-1j if clockwise else 1j) * grid(n)))


def ellipse(n, clockwise=True):
    a = grid(n)
    return PeriodicCurve(2 * np.cos(a) + (-1j if clockwise else 1j) * np.sin(a))


def smooth_field(seed, n, kmax=6, zero_mean=True):
    rng = np.random.default_rng(seed)
    a = grid(n)
    f = sum(rng.normal() * np.cos(k * a) / k ** 2 + rng.normal() * np.sin(k * a) / k ** 2
            for k in range(1, kmax + 1))
    return f if zero_mean else f + rng.normal()


seeds = st.integers(0, 2 ** 31)


def test_zero_density():
    c = ellipse(64)
    assert np.all(br(c, np.zeros(64)) == 0)
    assert np.all(br_alpha(c, np.zeros(64)) == 0)
    assert np.all(interface_velocity(c, np.zeros(64)) == 0)
    assert np.all(psi_from_omega(c, np.zeros(64)) == 0)


@pytest.mark.parametrize("n", [64, 128])
def test_circle_constant_density(n):
    c = circle(n)
    u = br(c, np.full(n, 0.8))
    za = c.derivative()
    assert np.max(np.abs(dot(u, za) - 0.4)) < 1e-10
    assert np.max(np.abs(dot(u, 1j * za))) < 1e-10
    assert np.max(np.abs(np.abs(interface_velocity(c, np.full(n, 0.8))) - 0.8)) < 1e-10
    assert np.max(np.abs(np.abs(br_alpha(c, np.full(n, 0.8))) - 0.4)) < 1e-10


def test_circle_resolutions_agree():
    u64 = br(circle(64), np.full(64, 1.3))
    u128 = br(circle(128), np.full(128, 1.3))
    assert np.max(np.abs(u128[::2] - u64)) < 1e-10


def _dense_br(curve, omega):
    # O(n^2) alternating-node sum written out pair by pair
    z, n = curve.z, curve.n
    out = np.zeros(n, dtype=complex)
    for i in range(n):
        for j in range(n):
            if (j - i) % 2:
                d = z[i] - z[j]
                out[i] += 1j * d / abs(d) ** 2 * omega[j]
    return out * 2 * (2 * np.pi / n) / (2 * np.pi)


def test_matches_dense_pairwise_sum():
    c = ellipse(32)
    w = smooth_field(3, 32, zero_mean=False)
    assert np.max(np.abs(br(c, w) - _dense_br(c, w))) < 1e-13


def test_ellipse_self_convergence():
    def run(n):
        c = ellipse(n, clockwise=False)
        return br(c, np.sin(grid(n)))

    assert np.max(np.abs(run(512)[::4] - run(128))) < 1e-10


def test_br_alpha_matches_centered_differences():
    n = 128
    a = grid(n)

    def z(t):
        return np.exp(1j * t) * (1 + 0.2 * np.cos(2 * t))

    def w(t):
        return np.sin(t) + 0.3 * np.cos(3 * t)

    ref = br_alpha(PeriodicCurve(z(a)), w(a))
    errs = []
    for h in (2e-3, 1e-3):
        plus, minus = (br(PeriodicCurve(z(a + s)), w(a + s)) for s in (h, -h))
        errs.append(np.max(np.abs((plus - minus) / (2 * h) - ref)))
    assert errs[1] < 1e-5
    assert 3.0 < errs[0] / errs[1] < 5.0


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_correction_is_tangential(seed):
    c = ellipse(64)
    w = smooth_field(seed, 64, zero_mean=False)
    perp = 1j * c.derivative()
    assert np.max(np.abs(dot(interface_velocity(c, w), perp) - dot(br(c, w), perp))) < 1e-14


def test_flat_periodic_sheet():
    a = grid(64)
    flat = PeriodicCurve.from_points(a + 0j, "physical_periodic")
    c = 0.7
    assert np.max(np.abs(br(flat, np.full(64, c)))) < 1e-14
    assert np.max(np.abs(interface_velocity(flat, np.full(64, c)) - c / 2)) < 1e-14


def _image_sum(z, w, images):
    n = len(z)
    odd = (np.arange(n)[None, :] - np.arange(n)[:, None]) % 2 == 1
    m = np.arange(-images, images + 1)[:, None, None]
    d = z[None, :, None] - (z[None, None, :] + 2 * np.pi * m)
    with np.errstate(invalid="ignore"):  # the i = j, m = 0 term is masked
        terms = np.where(odd, 1j * d / np.abs(d) ** 2 * w, 0.0)
    return terms.sum(axis=(0, 2)) * 2 * (2 * np.pi / n) / (2 * np.pi)


def test_periodized_kernel_matches_image_sum():
    a = grid(32)
    z = a + 0.2j * np.cos(a)
    w = 1 + 0.5 * np.sin(a)
    u = br(PeriodicCurve.from_points(z, "physical_periodic"), w)
    # the symmetric truncation error is ~ C / M; Richardson removes it
    s1, s2 = _image_sum(z, w, 1000), _image_sum(z, w, 2000)
    assert np.max(np.abs(u - (2 * s2 - s1))) < 1e-7


def test_arc_chord_failure():
    z = np.exp(1j * grid(32))
    z[10] = z[20]
    with pytest.raises(ArcChordFailure):
        br(PeriodicCurve(z), np.ones(32))


def test_degenerate_tangent():
    tiny = PeriodicCurve(1e-9 * np.exp(1j * grid(32)))
    with pytest.raises(DegenerateTangent):
        interface_velocity(tiny, np.ones(32))


def test_bit_identical_across_thread_counts():
    c = ellipse(256)
    w = smooth_field(5, 256)
    with threadpool_limits(limits=1):
        one = br(c, w)
    with threadpool_limits(limits=4):
        four = br(c, w)
    assert np.array_equal(one, four)


# ------------------------------------------------------------- inversions


def test_omega_from_phi_circle_zero():
    assert np.max(np.abs(omega_from_phi(circle(64, True), np.zeros(64)))) == 0


def test_omega_from_phi_dense_oracle():
    n = 64
    c = circle(n, clockwise=True)
    phi_a = 0.6 * np.cos(grid(n))
    # dense operator assembled column by column from br, gauge row appended
    za = c.derivative()
    cols = [np.eye(n)[j] + 2 * dot(br(c, np.eye(n)[j]), za) for j in range(n)]
    A = np.vstack([np.array(cols).T, np.ones(n) / n])
    ref = np.linalg.lstsq(A, np.append(2 * phi_a, 0.0), rcond=None)[0]
    assert np.max(np.abs(omega_from_phi(c, phi_a) - ref)) < 1e-10


@settings(max_examples=15, deadline=None)
@given(seeds)
def test_omega_from_phi_round_trip(seed):
    c = ellipse(128)
    w = smooth_field(seed, 128)
    back = omega_from_phi(c, phi_alpha_from_omega(c, w))
    assert np.max(np.abs(back - w)) < 1e-10


def test_omega_from_phi_physical_frame_round_trip():
    a = grid(128)
    c = PeriodicCurve.from_points(a + 1j * (0.2 * np.cos(a) - 0.5), "physical_periodic")
    phi_a = smooth_field(11, 128)
    w = omega_from_phi(c, phi_a)
    assert np.max(np.abs(phi_alpha_from_omega(c, w) - phi_a)) < 1e-10


@pytest.mark.parametrize("method", ["krylov", "fixed_point", "direct"])
def test_solver_methods_agree_and_residual(method):
    c = ellipse(128)
    w = smooth_field(2, 128)
    phi_a = phi_alpha_from_omega(c, w)
    res = solve_omega_from_phi(c, phi_a, SolveOptions(max_iterations=2000, method=method))
    assert res.residual <= 1e-12
    assert tangential_residual(c, res.omega, phi_a) <= 1e-12
    assert np.max(np.abs(res.omega - w)) < 1e-10


def test_nonconvergence_reports_history():
    c = ellipse(128)
    phi_a = phi_alpha_from_omega(c, smooth_field(2, 128))
    with pytest.raises(NonConvergence) as info:
        solve_omega_from_phi(c, phi_a, SolveOptions(max_iterations=2, method="fixed_point"))
    assert len(info.value.history) == 2


def test_zero_mean_violation():
    with pytest.raises(ZeroMeanViolation):
        omega_from_phi(ellipse(64), np.ones(64))
    with pytest.raises(ZeroMeanViolation):
        omega_from_psi(ellipse(64), 1 + np.cos(grid(64)))


def test_psi_circle_constant():
    c = circle(128, clockwise=True)
    psi = psi_from_omega(c, np.full(128, 1.7))
    assert np.max(np.abs(spectral_deriv(psi))) < 1e-8


@settings(max_examples=10, deadline=None)
@given(seeds)
def test_psi_derivative_is_normal_velocity(seed):
    n = 256
    c = ellipse(n)
    w = smooth_field(seed, n, zero_mean=False)
    ref = dot(br(c, w), 1j * c.derivative())
    assert np.max(np.abs(spectral_deriv(psi_from_omega(c, w)) - ref)) < 1e-8


def test_omega_from_psi_circle_zero():
    assert np.max(np.abs(omega_from_psi(circle(64, True), np.zeros(64)))) == 0


@settings(max_examples=15, deadline=None)
@given(seeds)
def test_omega_from_psi_round_trip(seed):
    c = ellipse(128)
    w = smooth_field(seed, 128)
    psi_a = dot(br(c, w), 1j * c.derivative())
    assert np.max(np.abs(omega_from_psi(c, psi_a) - w)) < 1e-8


def test_paper_initial_normal_velocity_positive_at_splash():
    n = 512
    curve, psi_a = preset_paper_splash(n)
    tilde = map_curve(curve, "to_tilde")
    w = omega_from_psi(tilde, psi_a - psi_a.mean())
    un = dot(br(tilde, w), 1j * tilde.derivative())
    a = tilde.alpha
    for target in (-np.pi / 2, np.pi / 2):
        assert un[np.argmin(np.abs(a - target))] > 0
    assert np.max(np.abs(un - (psi_a - psi_a.mean()))) < 1e-8


def test_paper_tilde_round_trips():
    n = 512
    tilde = map_curve(preset_paper_splash(n)[0], "to_tilde")
    a = grid(n)
    w = 0.3 * np.cos(a) + 0.1 * np.sin(2 * a)
    phi_a = phi_alpha_from_omega(tilde, w)
    res = solve_omega_from_phi(tilde, phi_a)
    assert res.residual <= 1e-12
    assert tangential_residual(tilde, res.omega, phi_a) <= 1e-12
    assert np.max(np.abs(res.omega - w)) < 1e-8
    psi_a = dot(br(tilde, w), 1j * tilde.derivative())
    assert np.max(np.abs(omega_from_psi(tilde, psi_a) - w)) < 1e-8


def test_kernel_is_reusable():
    c = ellipse(64)
    k = SheetKernel(c)
    w1, w2 = smooth_field(1, 64), smooth_field(2, 64)
    assert np.array_equal(br(c, w1, k), br(c, w1))
    M = tangential_matrix(k, c.derivative())
    assert np.max(np.abs(M @ w2 - 2 * phi_alpha_from_omega(c, w2))) < 1e-13
