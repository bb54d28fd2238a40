"""Cubic spline smoothing kernel and smoothing-length selection.

The scalar functions ``kernel_value`` and ``kernel_gradient_factor`` are
numba-compiled so the interaction loops can inline them; the
:class:`CubicSplineKernel` methods wrap them for array and Python use.
"""

from __future__ import annotations

import math

import numba as nb
import numpy as np

_INV_PI = 1.0 / math.pi


@nb.njit(cache=True, nogil=True, inline="always")
def value_core(r, inv_h, sigma):
    """W(r) given 1/h and sigma = 1/(pi h^3); used by the interaction loops."""
    q = r * inv_h
    if q < 1.0:
        return sigma * (1.0 - 1.5 * q * q + 0.75 * q * q * q)
    if q < 2.0:
        t = 2.0 - q
        return 0.25 * sigma * t * t * t
    return 0.0


@nb.njit(cache=True, nogil=True, inline="always")
def gradient_factor_core(r, inv_h, sigma):
    """(1/r) dW/dr given 1/h and sigma, so that grad W(x) = factor * x.

    Finite as r -> 0, which makes the gradient vanish at the origin.
    """
    q = r * inv_h
    if q < 1.0:
        return sigma * inv_h * inv_h * (-3.0 + 2.25 * q)
    if q < 2.0:
        t = 2.0 - q
        return -0.75 * sigma * inv_h * t * t / r
    return 0.0


@nb.njit(cache=True, nogil=True, inline="always")
def kernel_value(r, h):
    """W(r) for the 3D cubic spline, support 2h."""
    inv_h = 1.0 / h
    return value_core(r, inv_h, _INV_PI * inv_h * inv_h * inv_h)


@nb.njit(cache=True, nogil=True, inline="always")
def kernel_gradient_factor(r, h):
    """(1/r) dW/dr for the 3D cubic spline."""
    inv_h = 1.0 / h
    return gradient_factor_core(r, inv_h, _INV_PI * inv_h * inv_h * inv_h)


@nb.njit(cache=True)
def _values(r, h, out):
    for i in range(r.shape[0]):
        out[i] = kernel_value(r[i], h)


@nb.njit(cache=True)
def _gradients(d, h, out):
    for i in range(d.shape[0]):
        r = math.sqrt(d[i, 0] * d[i, 0] + d[i, 1] * d[i, 1] + d[i, 2] * d[i, 2])
        f = kernel_gradient_factor(r, h)
        out[i, 0] = f * d[i, 0]
        out[i, 1] = f * d[i, 1]
        out[i, 2] = f * d[i, 2]


class CubicSplineKernel:
    """Monaghan M4 cubic spline in three dimensions."""

    def __init__(self, smoothing_length: float):
        h = float(smoothing_length)
        if not (h > 0 and math.isfinite(h)):
            raise ValueError(f"smoothing length must be positive and finite, got {h}")
        self.smoothing_length = h
        self.support_radius = 2.0 * h
        inv_h = 1.0 / h
        self.normalization = _INV_PI * inv_h * inv_h * inv_h

    def __repr__(self):
        return f"CubicSplineKernel(h={self.smoothing_length!r})"

    def evaluate(self, distance):
        r = np.asarray(distance, dtype=np.float64)
        if not np.all(np.isfinite(r)):
            raise ValueError("distance must be finite")
        if np.any(r < 0):
            raise ValueError("distance must be non-negative")
        flat = np.ascontiguousarray(r.reshape(-1))
        out = np.empty_like(flat)
        _values(flat, self.smoothing_length, out)
        return float(out[0]) if r.ndim == 0 else out.reshape(r.shape)

    def gradient(self, displacement):
        d = np.asarray(displacement, dtype=np.float64)
        if d.shape[-1] != 3:
            raise ValueError("displacement must have a trailing dimension of 3")
        if not np.all(np.isfinite(d)):
            raise ValueError("displacement must be finite")
        flat = np.ascontiguousarray(d.reshape(-1, 3))
        out = np.empty_like(flat)
        _gradients(flat, self.smoothing_length, out)
        return out.reshape(d.shape)


def smoothing_length_from_count(fluid_volume: float, target_neighbors: int, particle_count: int) -> float:
    """Radius of a sphere expected to hold ``target_neighbors`` particles.

    h = cbrt(3 V k / (4 pi n)) for ``particle_count`` particles spread
    uniformly over ``fluid_volume``.
    """
    if fluid_volume <= 0 or target_neighbors <= 0 or particle_count <= 0:
        raise ValueError("volume, neighbor count and particle count must all be positive")
    if target_neighbors > particle_count:
        raise ValueError("target_neighbors cannot exceed particle_count")
    return (3.0 * fluid_volume * target_neighbors / (4.0 * math.pi * particle_count)) ** (1.0 / 3.0)
