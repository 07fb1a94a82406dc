"""Quadrature kernel selection.

The compiled extension handles the hot 4-dimensional case (n = 3); the
numpy fallback covers every dimension and is used when the extension is
missing or MINKRAY_NO_EXT is set.
"""

from __future__ import annotations

import os

import numpy as np

from . import _kernels_py

_ext = None
if not os.environ.get("MINKRAY_NO_EXT"):
    try:
        from . import _kernels_cy as _ext
    except ImportError:
        _ext = None

HAVE_EXT = _ext is not None


def backend_name(ndim: int = 4) -> str:
    return "cython" if (HAVE_EXT and ndim == 4) else "python"


def ray_sums(values: np.ndarray, starts: np.ndarray, step: np.ndarray,
             nsteps: int, s_step: float, backend: str | None = None) -> np.ndarray:
    """Trapezoid ray quadrature; dispatches to the compiled kernel when it applies."""
    values = np.ascontiguousarray(values, dtype=np.float64)
    starts = np.ascontiguousarray(starts, dtype=np.float64)
    step = np.ascontiguousarray(step, dtype=np.float64)
    use_ext = HAVE_EXT and values.ndim == 4 if backend is None else backend == "cython"
    if use_ext:
        if not HAVE_EXT or values.ndim != 4:
            raise ValueError("cython backend unavailable for this input")
        return _ext.ray_sums(values, starts, step, int(nsteps), float(s_step))
    return _kernels_py.ray_sums(values, starts, step, int(nsteps), float(s_step))


def interpolate(values: np.ndarray, points: np.ndarray, backend: str | None = None) -> np.ndarray:
    """Multilinear interpolation at fractional index coordinates, 0 outside."""
    values = np.ascontiguousarray(values, dtype=np.float64)
    points = np.ascontiguousarray(points, dtype=np.float64)
    use_ext = HAVE_EXT and values.ndim == 4 if backend is None else backend == "cython"
    if use_ext:
        if not HAVE_EXT or values.ndim != 4:
            raise ValueError("cython backend unavailable for this input")
        return _ext.interpolate(values, points)
    return _kernels_py.interpolate(values, points)
