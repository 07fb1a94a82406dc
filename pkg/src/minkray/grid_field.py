"""Uniform space-time grids and tensor fields on them.

Axis 0 is time; axes 1..n are space.  Symmetric 2-tensor fields store only
the upper triangle, component-major, in lexicographic order
(0,0),(0,1),...,(0,n),(1,1),...,(n,n).  Derivative operators use centered
second-order differences in the interior and one-sided second-order
differences on the boundary faces.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Grid",
    "ScalarField",
    "VectorField",
    "SymTensorField",
    "MinkowskiMetric",
    "component_index",
    "component_pairs",
    "num_components",
    "diff1",
    "trace",
    "divergence",
    "sym_derivative",
    "scalar_metric",
    "vector_divergence",
]


def num_components(n: int) -> int:
    """Number of independent components of a symmetric 2-tensor on R^{1+n}."""
    return (n + 1) * (n + 2) // 2


def component_index(i: int, j: int, n: int) -> int:
    """Upper-triangular lexicographic index of the (i, j) tensor component.

    Symmetric: (i, j) and (j, i) map to the same slot.
    """
    if not (0 <= i <= n and 0 <= j <= n):
        raise IndexError(f"component ({i},{j}) out of range for n={n}")
    if i > j:
        i, j = j, i
    return i * (n + 1) - i * (i - 1) // 2 + (j - i)


def component_pairs(n: int) -> list[tuple[int, int]]:
    """All (i, j) with i <= j in storage order."""
    return [(i, j) for i in range(n + 1) for j in range(i, n + 1)]


@dataclass(frozen=True)
class Grid:
    """Uniform tensor-product grid on a box in R^{1+n}.

    Parameters
    ----------
    n : spatial dimension, at least 3.
    shape : points per axis, 1+n entries, each at least 8.
    spacing : grid step per axis, positive.
    origin : coordinate of the corner point (index 0 on every axis).
    """

    n: int
    shape: tuple[int, ...]
    spacing: tuple[float, ...]
    origin: tuple[float, ...]

    def __post_init__(self):
        if self.n < 3:
            raise ValueError(f"spatial dimension must be >= 3, got n={self.n}")
        object.__setattr__(self, "shape", tuple(int(s) for s in self.shape))
        object.__setattr__(self, "spacing", tuple(float(h) for h in self.spacing))
        object.__setattr__(self, "origin", tuple(float(o) for o in self.origin))
        if len(self.shape) != self.n + 1:
            raise ValueError("shape must have 1+n entries")
        if len(self.spacing) != self.n + 1 or len(self.origin) != self.n + 1:
            raise ValueError("spacing and origin must have 1+n entries")
        if any(s < 8 for s in self.shape):
            raise ValueError("every axis needs at least 8 points")
        if any(h <= 0 for h in self.spacing):
            raise ValueError("grid spacing must be positive")

    @classmethod
    def box(cls, n: int, npts: int, lo: float = -1.0, hi: float = 1.0) -> "Grid":
        """Cubic grid with npts points per axis on [lo, hi]^{1+n}."""
        h = (hi - lo) / (npts - 1)
        return cls(n, (npts,) * (n + 1), (h,) * (n + 1), (lo,) * (n + 1))

    @property
    def npoints(self) -> int:
        return int(np.prod(self.shape))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def axis_coords(self, axis: int) -> np.ndarray:
        return self.origin[axis] + self.spacing[axis] * np.arange(self.shape[axis])

    def point(self, index) -> np.ndarray:
        """Coordinates of a multi-index."""
        return np.asarray(self.origin) + np.asarray(index) * np.asarray(self.spacing)

    def coordinate_arrays(self) -> list[np.ndarray]:
        """Broadcastable coordinate arrays, one per axis."""
        out = []
        d = self.n + 1
        for ax in range(d):
            sh = [1] * d
            sh[ax] = self.shape[ax]
            out.append(self.axis_coords(ax).reshape(sh))
        return out

    @property
    def box_lo(self) -> np.ndarray:
        return np.asarray(self.origin)

    @property
    def box_hi(self) -> np.ndarray:
        return self.box_lo + (np.asarray(self.shape) - 1) * np.asarray(self.spacing)

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.box_lo + self.box_hi)

    @property
    def circumradius(self) -> float:
        """Radius of the ball circumscribing the grid box."""
        return 0.5 * float(np.linalg.norm(self.box_hi - self.box_lo))

    def to_index_coords(self, points: np.ndarray) -> np.ndarray:
        """Map physical coordinates to fractional grid indices."""
        return (np.asarray(points) - self.box_lo) / np.asarray(self.spacing)


def _vanishes_on_faces(arr: np.ndarray, ndim_grid: int) -> bool:
    for ax in range(arr.ndim - ndim_grid, arr.ndim):
        sl0 = [slice(None)] * arr.ndim
        sl1 = [slice(None)] * arr.ndim
        sl0[ax] = 0
        sl1[ax] = -1
        if np.any(arr[tuple(sl0)]) or np.any(arr[tuple(sl1)]):
            return False
    return True


@dataclass
class ScalarField:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        if self.values.shape != self.grid.shape:
            raise ValueError("scalar values do not match the grid shape")
        self.values.setflags(write=False)


@dataclass
class VectorField:
    """Vector field with n+1 components; component 0 is the time component."""

    grid: Grid
    components: np.ndarray
    boundary_zero: bool = False

    def __post_init__(self):
        self.components = np.ascontiguousarray(self.components, dtype=np.float64)
        if self.components.shape != (self.grid.n + 1, *self.grid.shape):
            raise ValueError("vector field needs n+1 grid-shaped components")
        if self.boundary_zero and not _vanishes_on_faces(self.components, self.grid.n + 1):
            raise ValueError("boundary_zero flag set but components do not vanish on the faces")
        self.components.setflags(write=False)


@dataclass
class SymTensorField:
    """Symmetric 2-tensor field, upper-triangular component-major storage."""

    grid: Grid
    components: np.ndarray
    supported: bool = False

    def __post_init__(self):
        self.components = np.ascontiguousarray(self.components, dtype=np.float64)
        m = num_components(self.grid.n)
        if self.components.shape != (m, *self.grid.shape):
            raise ValueError(f"expected {m} grid-shaped components")
        if self.supported and not _vanishes_on_faces(self.components, self.grid.n + 1):
            raise ValueError("supported flag set but the field does not vanish on the faces")
        self.components.setflags(write=False)

    def component(self, i: int, j: int) -> np.ndarray:
        """The (i, j) component; (j, i) returns the identical array."""
        return self.components[component_index(i, j, self.grid.n)]

    @classmethod
    def zeros(cls, grid: Grid, supported: bool = True) -> "SymTensorField":
        return cls(grid, np.zeros((num_components(grid.n), *grid.shape)), supported=supported)


class MinkowskiMetric:
    """Diagonal metric (-1, 1, ..., 1) on R^{1+n}."""

    def __init__(self, n: int):
        if n < 3:
            raise ValueError("n >= 3 required")
        self.n = n
        diag = np.ones(n + 1)
        diag[0] = -1.0
        diag.setflags(write=False)
        self.diagonal = diag

    @property
    def trace(self) -> float:
        return float(self.diagonal.sum())

    def light_contraction(self, theta: np.ndarray) -> float:
        """g_ij contracted with (1, theta) twice; zero when |theta| = 1."""
        theta = np.asarray(theta, dtype=float)
        return float(-1.0 + theta @ theta)


def diff1(values: np.ndarray, axis: int, h: float) -> np.ndarray:
    """First derivative along one axis: centered interior, one-sided faces.

    Both stencils are second order.  Operates on the trailing grid axes of
    an array that may carry leading component axes.
    """
    out = np.empty_like(values)
    nd = values.ndim

    def sl(idx):
        s = [slice(None)] * nd
        s[axis] = idx
        return tuple(s)

    out[sl(slice(1, -1))] = (values[sl(slice(2, None))] - values[sl(slice(None, -2))]) / (2.0 * h)
    out[sl(0)] = (-3.0 * values[sl(0)] + 4.0 * values[sl(1)] - values[sl(2)]) / (2.0 * h)
    out[sl(-1)] = (3.0 * values[sl(-1)] - 4.0 * values[sl(-2)] + values[sl(-3)]) / (2.0 * h)
    return out


def trace(f: SymTensorField) -> ScalarField:
    """Euclidean trace: pointwise sum of the n+1 diagonal components."""
    n = f.grid.n
    out = np.zeros(f.grid.shape)
    for i in range(n + 1):
        out += f.component(i, i)
    return ScalarField(f.grid, out)


def divergence(f: SymTensorField) -> VectorField:
    """Euclidean divergence (dF)_i = sum_j d_j F_ij over all n+1 axes."""
    n = f.grid.n
    out = np.zeros((n + 1, *f.grid.shape))
    for i in range(n + 1):
        for j in range(n + 1):
            out[i] += diff1(f.component(i, j), j, f.grid.spacing[j])
    return VectorField(f.grid, out)


def sym_derivative(v: VectorField) -> SymTensorField:
    """Symmetrized derivative (dv)_ij = (d_i v_j + d_j v_i) / 2."""
    g = v.grid
    n = g.n
    comps = np.empty((num_components(n), *g.shape))
    for k, (i, j) in enumerate(component_pairs(n)):
        di_vj = diff1(v.components[j], i, g.spacing[i])
        if i == j:
            comps[k] = di_vj
        else:
            comps[k] = 0.5 * (di_vj + diff1(v.components[i], j, g.spacing[j]))
    return SymTensorField(g, comps)


def scalar_metric(lam: ScalarField) -> SymTensorField:
    """The tensor field lambda * g for the Minkowski metric g."""
    n = lam.grid.n
    comps = np.zeros((num_components(n), *lam.grid.shape))
    comps[component_index(0, 0, n)] = -lam.values
    for i in range(1, n + 1):
        comps[component_index(i, i, n)] = lam.values
    return SymTensorField(lam.grid, comps)


def vector_divergence(v: VectorField) -> ScalarField:
    """Scalar divergence of a vector field, time component included."""
    g = v.grid
    out = np.zeros(g.shape)
    for k in range(g.n + 1):
        out += diff1(v.components[k], k, g.spacing[k])
    return ScalarField(g, out)
