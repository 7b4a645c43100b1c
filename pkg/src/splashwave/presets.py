"""Initial data: the splash preset and small test configurations."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .conformal import SQRT2_2
from .curve import PeriodicCurve, grid
from .errors import ParseError

PRESETS = ("paper_splash", "flat_test", "circle_test")


def paper_splash_z(alpha):
    """Closed-form splash curve; z(pi/2) == z(-pi/2) == (0, 0.3)."""
    alpha = np.asarray(alpha, dtype=float)
    z1 = (alpha + 0.25 * (-1.5 * np.pi - 1.9) * np.sin(alpha) + 0.5 * np.sin(2 * alpha)
          + 0.25 * (0.5 * np.pi - 1.9) * np.sin(3 * alpha))
    z2 = 0.1 * np.cos(alpha) - 0.3 * np.cos(2 * alpha) + 0.1 * np.cos(3 * alpha)
    return z1 + 1j * z2


def paper_splash_psi_alpha(alpha):
    alpha = np.asarray(alpha, dtype=float)
    return 3.0 * np.cos(alpha) - 3.4 * np.cos(2 * alpha) + np.cos(3 * alpha) + 0.2 * np.cos(4 * alpha)


def preset_paper_splash(n: int) -> tuple[PeriodicCurve, np.ndarray]:
    """Physical splash curve and the prescribed normal data Psi_alpha."""
    if n % 2:
        raise ValueError("n must be even")
    a = grid(n)
    return PeriodicCurve.from_points(paper_splash_z(a), "physical_periodic"), paper_splash_psi_alpha(a)


def preset_flat_test(n: int, depth: float = 0.5, amplitude: float = 0.1) -> tuple[PeriodicCurve, np.ndarray]:
    """Gentle physical graph below the origin with a one-mode normal velocity."""
    a = grid(n)
    z = a + 1j * (-depth + amplitude * np.cos(a))
    return PeriodicCurve.from_points(z, "physical_periodic"), 0.2 * np.cos(a)


def preset_circle_test(n: int, radius: float = 0.4) -> tuple[PeriodicCurve, np.ndarray]:
    """Clockwise tilde circle around the deep-water image q^2, fluid inside."""
    a = grid(n)
    centre = -SQRT2_2 + 1j * SQRT2_2
    return PeriodicCurve(centre + radius * np.exp(-1j * a), "tilde_closed"), 0.1 * np.cos(a)


@dataclass(frozen=True)
class FourierTable:
    """Custom preset: rows (k, z1_cos, z1_sin, z2_cos, z2_sin, psi_cos, psi_sin)."""

    rows: tuple[tuple[float, ...], ...]

    @classmethod
    def parse(cls, text: str) -> "FourierTable":
        rows = []
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.replace(",", " ").split()
            if len(parts) != 7:
                raise ParseError("expected 7 columns: k z1c z1s z2c z2s psic psis", lineno)
            try:
                vals = tuple(float(p) for p in parts)
            except ValueError as exc:
                raise ParseError(str(exc), lineno) from None
            if not all(np.isfinite(vals)) or vals[0] < 0 or vals[0] != int(vals[0]):
                raise ParseError("non-finite value or bad wavenumber", lineno)
            rows.append(vals)
        return cls(tuple(rows))

    def build(self, n: int) -> tuple[PeriodicCurve, np.ndarray]:
        if any(r[0] > n // 4 for r in self.rows):
            raise ValueError("custom table has modes beyond n/4")
        a = grid(n)
        z1 = a.copy()
        z2 = np.zeros(n)
        psi = np.zeros(n)
        for k, z1c, z1s, z2c, z2s, pc, ps in self.rows:
            c, s = np.cos(k * a), np.sin(k * a)
            z1 += z1c * c + z1s * s
            z2 += z2c * c + z2s * s
            psi += pc * c + ps * s
        return PeriodicCurve.from_points(z1 + 1j * z2, "physical_periodic"), psi


def load_preset(name: str, n: int, table: FourierTable | None = None):
    if name == "paper_splash":
        return preset_paper_splash(n)
    if name == "flat_test":
        return preset_flat_test(n)
    if name == "circle_test":
        return preset_circle_test(n)
    if name == "custom":
        if table is None:
            raise ValueError("custom preset needs a Fourier table")
        return table.build(n)
    raise ValueError(f"unknown preset {name!r}")
