"""Shared fixtures and the per-criterion acceptance summary."""

from functools import lru_cache

import numpy as np
import pytest

from splashwave.curve import interpolate, resample, spectral_deriv
from splashwave.evolution import RunConfig, initial_state, run
from splashwave.presets import preset_flat_test, preset_paper_splash

CRITERIA = {
    1: "splash-point geometry",
    2: "splash identity",
    3: "splash-to-graph run",
    4: "turn-over snapshot",
    5: "conformal self-consistency",
    6: "Birkhoff-Rott oracle",
    7: "inversion round trips",
    8: "formulation equivalence",
    9: "time-reversal round trip",
    10: "Rayleigh-Taylor sign",
    11: "stability scaling",
}

_outcomes: dict[int, list[tuple[str, str, str]]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(k): test counts toward acceptance criterion k")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        detail = "; ".join(v for k, v in item.user_properties if k == "measured")
        state = "passed" if rep.passed else "skipped" if rep.skipped else "failed"
        _outcomes.setdefault(marker.args[0], []).append((item.name, state, detail))


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for k, title in CRITERIA.items():
        results = _outcomes.get(k)
        if not results:
            tr.write_line(f"NOT RUN  {k:2d}. {title}")
            continue
        ok = all(state == "passed" for _, state, _ in results)
        tr.write_line(f"{'PASS' if ok else 'FAIL'}     {k:2d}. {title}")
        for name, state, detail in results:
            tr.write_line(f"           {state:7s} {name}" + (f"  [{detail}]" if detail else ""))


@pytest.fixture
def measured(record_property):
    """Attach a measured value to the acceptance summary line."""

    def put(text):
        record_property("measured", text)

    return put


# ------------------------------------------------------------------ states


@lru_cache(maxsize=None)
def _paper_state(n, formulation):
    curve, psi = preset_paper_splash(n)
    return initial_state(curve, psi, formulation)


@lru_cache(maxsize=None)
def _flat_state(n, formulation):
    curve, psi = preset_flat_test(n)
    return initial_state(curve, psi, formulation)


@pytest.fixture(scope="session")
def paper_state():
    """Tilde-frame initial state of the splash preset: paper_state(n, formulation)."""
    return lambda n, formulation="bhl": _paper_state(n, formulation)


@pytest.fixture(scope="session")
def flat_state():
    return lambda n, formulation="bhl": _flat_state(n, formulation)


RUN_T_FINAL = 8e-3


@pytest.fixture(scope="session")
def reversed_run_512():
    """Reversed splash run, n = 512, dt = 1e-6, t = 8e-3 (several minutes)."""
    cfg = RunConfig(n=512, dt=1e-6, t_final=RUN_T_FINAL, snapshot_stride=250)
    return run(cfg, _paper_state(512, "bhl"))


@pytest.fixture(scope="session")
def reversed_run_256():
    cfg = RunConfig(n=256, dt=1e-6, t_final=RUN_T_FINAL, snapshot_stride=250)
    return run(cfg, _paper_state(256, "bhl"))


# ---------------------------------------------------------------- geometry


def curve_distance(ref, points) -> float:
    """Largest distance from ``points`` to the interpolant of the closed curve ``ref``.

    Each foot point solves Re((z(x) - p) conj z'(x)) = 0 by Newton's method,
    started from the nearest sample of an 8x refined copy.
    """
    points = np.asarray(points)
    m = 8 * ref.n
    fine = resample(ref.data, m)
    af = -np.pi + 2 * np.pi * np.arange(m) / m
    x = af[np.argmin(np.abs(fine[None, :] - points[:, None]), axis=1)]
    d1, d2 = spectral_deriv(ref.data), spectral_deriv(ref.data, 2)
    for _ in range(8):
        r = interpolate(ref.data, x) - points
        zp, zpp = interpolate(d1, x), interpolate(d2, x)
        x = x - np.real(r * np.conj(zp)) / (np.abs(zp) ** 2 + np.real(r * np.conj(zpp)))
    return float(np.max(np.abs(interpolate(ref.data, x) - points)))


@pytest.fixture(scope="session")
def distance_to_curve():
    return curve_distance
