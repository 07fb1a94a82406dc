"""Test-field generators: Gaussian bumps, gauge fields, solenoidal fields.

Gauge phantoms are built from closed-form pieces so the symmetrized
derivative is sampled analytically; solenoidal phantoms are built in the
frequency domain by projecting a band-limited random spectrum onto the
divergence and trace conditions, then windowed to compact support.  The
projection uses the discrete difference symbols sin(zeta*h)/h, so the
package's divergence operator annihilates the pre-window field at
interior points to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .freq_solver import constraint_matrix
from .grid_field import (
    Grid,
    ScalarField,
    SymTensorField,
    VectorField,
    component_pairs,
    divergence,
    num_components,
    trace,
)

__all__ = [
    "GaussianSpec",
    "SupportError",
    "phantom_gaussian",
    "phantom_gauge",
    "phantom_solenoidal",
    "solenoidal_projector",
    "flat_top_window",
]

_CLIP = 1e-14


class SupportError(ValueError):
    """Generated field cannot carry the compact support flag."""


@dataclass(frozen=True)
class GaussianSpec:
    """amplitude * exp(-|z - center|^2 / width^2)."""

    amplitude: float
    center: tuple
    width: float

    def values(self, grid: Grid) -> np.ndarray:
        r2 = np.zeros(grid.shape)
        for ax, x in enumerate(grid.coordinate_arrays()):
            r2 = r2 + (x - self.center[ax]) ** 2
        return self.amplitude * np.exp(-r2 / self.width ** 2)

    def gradient(self, grid: Grid, values: np.ndarray, axis: int) -> np.ndarray:
        x = grid.coordinate_arrays()[axis]
        return values * (-2.0 * (x - self.center[axis]) / self.width ** 2)


def _clip_small(arr: np.ndarray, scale: float) -> np.ndarray:
    out = arr.copy()
    out[np.abs(out) < _CLIP * scale] = 0.0
    return out


def phantom_gaussian(grid: Grid, center, width: float, component_weights) -> SymTensorField:
    """Gaussian bump with per-component weights, clipped to compact support.

    Values below 1e-14 of the weight scale are zeroed; the width must be
    small enough that the whole boundary falls under that threshold.
    """
    if width <= 0:
        raise ValueError("width must be positive")
    center = np.asarray(center, dtype=np.float64)
    if np.any(center < grid.box_lo) or np.any(center > grid.box_hi):
        raise ValueError("center must lie inside the grid box")
    w = np.asarray(component_weights, dtype=np.float64)
    m = num_components(grid.n)
    if w.shape != (m,):
        raise ValueError(f"need {m} component weights")

    bump = GaussianSpec(1.0, tuple(center), width).values(grid)
    comps = w[:, None] * bump.reshape(1, -1)
    comps = comps.reshape(m, *grid.shape)
    scale = np.abs(w).max()
    if scale == 0.0:
        return SymTensorField.zeros(grid)
    comps = _clip_small(comps, scale)
    try:
        return SymTensorField(grid, comps, supported=True)
    except ValueError as exc:
        raise SupportError(
            f"width {width} too large: the bump does not vanish on the boundary") from exc


def _poly_window(grid: Grid):
    """prod_i (1 - xi_i^2)^3 on box coordinates, with its analytic gradient."""
    lo, hi = grid.box_lo, grid.box_hi
    xs = grid.coordinate_arrays()
    factors, dfactors = [], []
    for ax, x in enumerate(xs):
        xi = 2.0 * (x - lo[ax]) / (hi[ax] - lo[ax]) - 1.0
        q = (1.0 - xi ** 2) ** 3
        dq = -6.0 * xi * (1.0 - xi ** 2) ** 2 * (2.0 / (hi[ax] - lo[ax]))
        factors.append(q)
        dfactors.append(dq)
    w = np.ones(grid.shape)
    for q in factors:
        w = w * q
    grads = []
    for ax in range(grid.n + 1):
        gax = np.ones(grid.shape)
        for k, q in enumerate(factors):
            gax = gax * (dfactors[k] if k == ax else q)
        grads.append(gax)
    return w, grads


def phantom_gauge(grid: Grid, lambda_spec: GaussianSpec, v_specs):
    """Gauge field F = lambda*g + dv with analytic derivatives.

    v_specs holds one GaussianSpec per component; every component is
    multiplied by a polynomial window so v vanishes identically on the
    boundary.  Returns (F, lambda, v).
    """
    n = grid.n
    if len(v_specs) != n + 1:
        raise ValueError("need one v spec per component")
    lam_vals = _clip_small(lambda_spec.values(grid), abs(lambda_spec.amplitude) or 1.0)

    win, win_grad = _poly_window(grid)
    gvals = [spec.values(grid) for spec in v_specs]
    comps_v = np.stack([g * win for g in gvals])

    def dv(j, i):
        # analytic d_i v_j by the product rule
        return v_specs[j].gradient(grid, gvals[j], i) * win + gvals[j] * win_grad[i]

    m = num_components(n)
    comps_f = np.zeros((m, *grid.shape))
    for k, (i, j) in enumerate(component_pairs(n)):
        comps_f[k] = dv(j, i) if i == j else 0.5 * (dv(j, i) + dv(i, j))
        if i == j:
            comps_f[k] += -lam_vals if i == 0 else lam_vals

    try:
        f = SymTensorField(grid, comps_f, supported=True)
    except ValueError as exc:
        raise SupportError("gauge phantom does not vanish on the boundary; "
                           "narrow the lambda width") from exc
    return f, ScalarField(grid, lam_vals), VectorField(grid, comps_v, boundary_zero=True)


def solenoidal_projector(symbol_vec, n: int) -> np.ndarray:
    """Orthogonal projector onto the divergence and trace null space.

    symbol_vec holds the per-axis derivative symbols at one frequency.
    """
    C = constraint_matrix(np.asarray(symbol_vec, dtype=np.float64), n)
    m = num_components(n)
    return np.eye(m) - np.linalg.pinv(C) @ C


def flat_top_window(grid: Grid, collar: float = 0.15) -> np.ndarray:
    """Window equal to 1 in the bulk, rolling smoothly to 0 at the faces.

    collar is the fraction of each axis length taken by the roll-off.
    """
    w = np.ones(grid.shape)
    lo, hi = grid.box_lo, grid.box_hi
    for ax, x in enumerate(grid.coordinate_arrays()):
        width = collar * (hi[ax] - lo[ax])
        t = np.minimum((x - lo[ax]) / width, (hi[ax] - x) / width)
        t = np.clip(t, 0.0, 1.0)
        ramp = t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
        w = w * ramp
    return w


def phantom_solenoidal(grid: Grid, band_limit: float, seed: int,
                       bump_count: int = 6, collar: float = 0.15):
    """Band-limited divergence-free trace-free field, windowed to support.

    A random bump superposition is transformed, tapered below band_limit,
    and projected at each lattice frequency onto the n+2 constraints using
    the discrete difference symbols.  Hermitian symmetry makes the spatial
    field real; a flat-top window then enforces compact support.  Returns
    the field and a report with the constraint residuals before and after
    windowing.
    """
    n = grid.n
    m = num_components(n)
    nyquist = np.pi / max(grid.spacing)
    if band_limit >= nyquist:
        raise ValueError(f"band_limit {band_limit} is not below the grid Nyquist {nyquist:.3g}")

    rng = np.random.default_rng(seed)
    lo, hi = grid.box_lo, grid.box_hi
    span = hi - lo
    comps = np.zeros((m, *grid.shape))
    for _ in range(bump_count):
        center = tuple(rng.uniform(lo + 0.3 * span, hi - 0.3 * span))
        width = rng.uniform(0.1, 0.2) * float(span.min())
        bump = GaussianSpec(1.0, center, width).values(grid)
        weights = rng.standard_normal(m)
        comps += weights[:, None].reshape(m, *[1] * (n + 1)) * bump

    spec = np.fft.fftn(comps, axes=tuple(range(1, n + 2)))

    freqs = [2.0 * np.pi * np.fft.fftfreq(N, d=h) for N, h in zip(grid.shape, grid.spacing)]
    mesh = np.meshgrid(*freqs, indexing="ij")
    absz = np.sqrt(sum(zz ** 2 for zz in mesh))
    q = absz / band_limit
    taper = np.where(q <= 0.7, 1.0, np.where(q >= 1.0, 0.0,
                     np.cos(0.5 * np.pi * (q - 0.7) / 0.3) ** 2))
    spec *= taper[np.newaxis]

    # project the surviving frequencies onto the constraint null space,
    # using the centered-difference symbols sin(zeta h)/h
    live = np.argwhere(taper > 0.0)
    h = np.asarray(grid.spacing)
    for idx in live:
        zeta = np.array([freqs[ax][i] for ax, i in enumerate(idx)])
        sigma = np.sin(zeta * h) / h
        P = solenoidal_projector(sigma, n)
        key = (slice(None), *idx)
        spec[key] = P @ spec[key]

    spatial = np.fft.ifftn(spec, axes=tuple(range(1, n + 2)))
    assert np.abs(spatial.imag).max() < 1e-9 * max(np.abs(spatial.real).max(), 1e-300)
    comps = spatial.real
    comps /= max(np.abs(comps).max(), 1e-300)

    sl_int = (slice(None),) + (slice(1, -1),) * (n + 1)
    pre = SymTensorField(grid, comps)
    pre_div = float(np.abs(divergence(pre).components[sl_int]).max())
    pre_trace = float(np.abs(trace(pre).values).max())

    window = flat_top_window(grid, collar)
    windowed = comps * window[np.newaxis]
    out = SymTensorField(grid, windowed, supported=True)
    post_div = float(np.abs(divergence(out).components[sl_int]).max())
    post_trace = float(np.abs(trace(out).values).max())
    report = {
        "pre_window_div": pre_div,
        "pre_window_trace": pre_trace,
        "post_window_div": post_div,
        "post_window_trace": post_trace,
        "scale": float(np.abs(windowed).max()),
        "band_limit": band_limit,
        "collar": collar,
    }
    return out, report
