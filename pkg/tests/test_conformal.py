import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from splashwave.conformal import (
    CANONICAL,
    SINGULAR_POINTS,
    SQRT2_2,
    BranchSpec,
    grad_p2_inverse,
    grad_q,
    map_curve,
    map_from_tilde,
    map_to_tilde,
    min_singular_distance,
    p2_inverse,
    q_squared,
)
from splashwave.curve import PeriodicCurve, grid
from splashwave.errors import BranchAmbiguity, PoleInput, SingularPointInput
from splashwave.presets import preset_paper_splash

SPLASH = 0.27284156 * (1 + 1j)

# water-region points off the cut rays {iy, y >= 0} and {pi + iy}
water = st.builds(
    complex,
    st.floats(-3.0, 3.0).filter(lambda x: abs(x) > 1e-3 and abs(abs(x) - np.pi) > 1e-3),
    st.floats(-2.0, 0.9),
)


def test_singular_points_layout():
    q = SINGULAR_POINTS
    assert q[0] == 0
    assert np.allclose(np.abs(q[1:].real), SQRT2_2)
    assert np.allclose(np.abs(q[1:].imag), SQRT2_2)
    assert np.allclose(q_squared(q[1:] * (1 + 1e-7)), 0.0, atol=1e-12)
    with pytest.raises(SingularPointInput):
        q_squared(q[0])


def test_origin_maps_to_origin():
    assert map_to_tilde(0j) == 0


def test_deep_water_limit():
    z = map_to_tilde(-10j)
    assert abs(z - (-SQRT2_2 + 1j * SQRT2_2)) < np.exp(-10)


def test_canonical_anchor():
    spec = BranchSpec.canonical()
    assert map_to_tilde(spec.reference_point, spec) == spec.anchor_value


def test_splash_point_image():
    assert abs(map_to_tilde(0.3j) - SPLASH) < 1e-6


def test_splash_point_on_cut_can_raise():
    with pytest.raises(BranchAmbiguity):
        map_to_tilde(0.3j, on_cut="raise")


def test_pole_input():
    with pytest.raises(PoleInput):
        map_to_tilde(np.pi + 0j)


def test_map_from_tilde_examples():
    assert abs(map_from_tilde(SPLASH) - 0.3j) < 1e-6
    w = 1.0 - 0.5j
    assert abs(map_from_tilde(map_to_tilde(w)) - w) < 1e-12


def test_map_from_tilde_real_axis_against_bisection():
    # oracle: bisection on the forward map along the real segment
    lo, hi = 0.0, 3.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if abs(map_to_tilde(mid + 0j)) < 0.9:
            lo = mid
        else:
            hi = mid
    w = map_from_tilde(0.9 + 0j)
    assert abs(w.imag) < 1e-14
    assert abs(w.real - lo) < 1e-12
    assert abs(w.real - 2 * np.arctan(0.81)) < 1e-12


def test_map_from_tilde_rejects_singular_points():
    for q in SINGULAR_POINTS:
        with pytest.raises(SingularPointInput):
            map_from_tilde(q + 1e-10)


def _fd_q2(w, h=1e-6):
    return abs((map_to_tilde(w + h) - map_to_tilde(w - h)) / (2 * h)) ** 2


def test_q_squared_examples():
    assert abs(q_squared(1 + 0j) - 0.25) < 1e-12
    assert abs(_fd_q2(np.pi / 2 + 0j) - 0.25) < 1e-8
    assert q_squared(SQRT2_2 * (1 + 1j)) < 1e-12
    w = 0.3j + 1e-3  # just off the cut, same branch locally
    ref = _fd_q2(w)
    assert abs(q_squared(map_to_tilde(w)) - ref) / ref < 1e-6


def test_p2_inverse_examples():
    assert p2_inverse(0j) == 0
    assert abs(p2_inverse(SPLASH) - map_from_tilde(SPLASH).imag) < 1e-12
    assert abs(p2_inverse(SPLASH) - 0.3) < 1e-6
    # unit circle points with z^2 real
    for z in (1.0 + 0j, -1.0 + 0j, 1j):
        assert abs(p2_inverse(z)) < 1e-15


def _central(fun, z, h=1e-6):
    return complex((fun(z + h) - fun(z - h)) / (2 * h), (fun(z + 1j * h) - fun(z - 1j * h)) / (2 * h))


def test_gradients_against_central_differences():
    assert abs(grad_p2_inverse(0j)) < 1e-15
    assert abs(_central(p2_inverse, 0j)) < 1e-9
    ref = _central(lambda z: np.sqrt(q_squared(z)), 1 + 0j)
    assert abs(grad_q(1 + 0j) - ref) / abs(ref) < 1e-6
    for z in (0.3 + 0.2j, -0.5 + 0.1j, 0.2 - 0.6j):
        ref = _central(p2_inverse, z)
        assert abs(grad_p2_inverse(z) - ref) < 1e-8 * max(1, abs(ref))
        ref = _central(lambda u: np.sqrt(q_squared(u)), z)
        assert abs(grad_q(z) - ref) < 1e-7 * max(1, abs(ref))


@given(st.complex_numbers(min_magnitude=0.05, max_magnitude=0.65, allow_nan=False, allow_infinity=False))
def test_grad_q_is_odd(z):
    assert abs(grad_q(-z) + grad_q(z)) < 1e-12 * max(1, abs(grad_q(z)))


@settings(max_examples=100, deadline=None)
@given(water)
def test_round_trip_property(w):
    z = map_to_tilde(w)
    back = map_from_tilde(z)
    assert abs(back - w) < 1e-12 * max(1, abs(w))


@settings(max_examples=100, deadline=None)
@given(water)
def test_p2_inverse_is_height(w):
    assert abs(p2_inverse(map_to_tilde(w)) - w.imag) < 1e-10


@settings(max_examples=100, deadline=None)
@given(water)
def test_q_squared_matches_finite_differences(w):
    ref = _fd_q2(w, 1e-5)
    assert abs(q_squared(map_to_tilde(w)) - ref) < 1e-7 * max(1.0, ref)


@settings(max_examples=50, deadline=None)
@given(water)
def test_periodicity(w):
    assert abs(map_to_tilde(w + 2 * np.pi) - map_to_tilde(w)) < 1e-12 * max(1, abs(map_to_tilde(w)))


def test_map_curve_paper_round_trip_and_splash_nodes():
    curve, _ = preset_paper_splash(256)
    tilde = map_curve(curve, "to_tilde")
    a = tilde.alpha
    i, j = np.argmin(np.abs(a + np.pi / 2)), np.argmin(np.abs(a - np.pi / 2))
    imgs = sorted([tilde.z[i], tilde.z[j]], key=lambda z: z.real)
    assert abs(imgs[0] + SPLASH) < 1e-6 and abs(imgs[1] - SPLASH) < 1e-6
    back = map_curve(tilde, "from_tilde")
    assert np.max(np.abs(back.z - curve.z)) < 1e-10


def test_map_curve_branch_continuity():
    curve, _ = preset_paper_splash(256)
    tilde = map_curve(curve, "to_tilde")
    steps = np.abs(np.diff(np.append(tilde.z, tilde.z[0])))
    local = np.abs(tilde.derivative()) * 2 * np.pi / tilde.n
    assert np.all(steps < 10 * np.maximum(local, np.roll(local, -1)))


def test_map_curve_through_q0():
    a = grid(64)
    # z(0) = 0 while z(+-pi) stays below the poles of tan(w/2)
    curve = PeriodicCurve.from_points(a + 1j * (0.2 * np.sin(a) + 0.1 * np.cos(a) - 0.1), "physical_periodic")
    with pytest.raises(SingularPointInput):
        map_curve(curve, "to_tilde")


def test_min_singular_distance():
    d = min_singular_distance(np.array([0.1 + 0j]))
    assert d.shape == (5,)
    assert abs(d[0] - 0.1) < 1e-15
    assert CANONICAL.sign in (-1, 1)
