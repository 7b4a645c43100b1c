from __future__ import annotations

import numpy as np


def as_complex(z) -> np.ndarray | complex:
    """Accept a complex scalar/array or a real array with a trailing axis of size 2."""
    if np.iscomplexobj(z):
        return z
    arr = np.asarray(z, dtype=float)
    if arr.ndim >= 1 and arr.shape[-1] == 2:
        out = arr[..., 0] + 1j * arr[..., 1]
        return complex(out) if out.ndim == 0 else out
    return arr.astype(complex)


def to_points(z) -> np.ndarray:
    """Complex array -> real array with trailing (x, y) axis."""
    z = np.asarray(z, dtype=complex)
    return np.stack([z.real, z.imag], axis=-1)


def dot(a, b):
    """Euclidean dot product of 2D vectors stored as complex numbers."""
    return (a * np.conj(b)).real


def perp(a):
    """(a1, a2)^perp = (-a2, a1), i.e. multiplication by i."""
    return 1j * a
