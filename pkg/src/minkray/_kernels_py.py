"""Pure-numpy ray quadrature kernels (fallback for the compiled extension).

Multilinear interpolation with zero-valued corners outside the grid,
composite trapezoid rule along each ray.  Points are given in fractional
index coordinates.  The array is padded with one zero layer so cells that
straddle the boundary interpolate toward zero, matching the compiled
kernel exactly.
"""

from __future__ import annotations

import numpy as np
from scipy.ndimage import map_coordinates

BACKEND = "python"

_CHUNK = 1 << 18  # interpolation points per map_coordinates call


def _padded(values: np.ndarray) -> np.ndarray:
    return np.pad(values, 1, mode="constant")


def interpolate(values: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Multilinear interpolation of a grid array at fractional indices."""
    return map_coordinates(_padded(values), (points + 1.0).T,
                           order=1, mode="constant", cval=0.0)


def ray_sums(values: np.ndarray, starts: np.ndarray, step: np.ndarray,
             nsteps: int, s_step: float) -> np.ndarray:
    """Trapezoid quadrature along parallel rays through a sampled field.

    Ray r is sampled at starts[r] + k*step for k = 0..nsteps and the samples
    are combined with trapezoid weights times s_step.
    """
    padded = _padded(values)
    starts = np.asarray(starts, dtype=np.float64) + 1.0
    nrays = starts.shape[0]
    out = np.empty(nrays)
    k = np.arange(nsteps + 1)
    w = np.ones(nsteps + 1)
    w[0] = w[-1] = 0.5
    rows_per_chunk = max(1, _CHUNK // (nsteps + 1))
    for lo in range(0, nrays, rows_per_chunk):
        hi = min(lo + rows_per_chunk, nrays)
        pts = starts[lo:hi, None, :] + k[None, :, None] * step[None, None, :]
        vals = map_coordinates(padded, pts.reshape(-1, values.ndim).T,
                               order=1, mode="constant", cval=0.0)
        out[lo:hi] = vals.reshape(hi - lo, nsteps + 1) @ w
    return out * s_step
