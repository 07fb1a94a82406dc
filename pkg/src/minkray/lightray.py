"""Forward light ray transform and the geometry around one direction.

Rays run along s -> (t + s, x + s*theta) with theta a unit vector, i.e. in
the null direction (1, theta).  The transform integrates the contraction
of a symmetric 2-tensor field with (1, theta) twice.  Slabs evaluate the
transform on a uniform lattice in the hyperplane (1, theta)^perp.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .grid_field import Grid, SymTensorField, component_pairs

__all__ = [
    "Direction",
    "RayGeometry",
    "Slab",
    "perp_basis",
    "rotation_to_e2",
    "direction_family",
    "light_weights",
    "contracted_scalar",
    "light_ray_integral",
    "transform_slab",
]

log = logging.getLogger("minkray")

_UNIT_TOL = 1e-12


@dataclass(frozen=True)
class Direction:
    """Unit vector theta on the sphere S^{n-1}."""

    theta: np.ndarray

    def __post_init__(self):
        th = np.ascontiguousarray(self.theta, dtype=np.float64)
        if abs(np.linalg.norm(th) - 1.0) > _UNIT_TOL:
            raise ValueError(f"|theta| = {np.linalg.norm(th)!r} is not 1 within {_UNIT_TOL}")
        th.setflags(write=False)
        object.__setattr__(self, "theta", th)

    @property
    def n(self) -> int:
        return self.theta.shape[0]

    @property
    def tilde(self) -> np.ndarray:
        """The null vector (1, theta) in R^{1+n}."""
        return np.concatenate([[1.0], self.theta])

    @classmethod
    def axis(cls, n: int, k: int = 1) -> "Direction":
        th = np.zeros(n)
        th[k - 1] = 1.0
        return cls(th)


def perp_basis(d: Direction) -> np.ndarray:
    """Orthonormal basis of (1, theta)^perp, shape (n, 1+n).

    The first vector is (1, -theta)/sqrt(2); the rest are (0, w) with {w}
    a deterministic Householder completion of theta in R^n.
    """
    n = d.n
    theta = d.theta
    rows = np.empty((n, n + 1))
    rows[0, 0] = 1.0 / np.sqrt(2.0)
    rows[0, 1:] = -theta / np.sqrt(2.0)
    # Householder reflection sending e_1 to -sign(theta_1)*theta; its trailing
    # columns complete theta orthonormally and the sign choice avoids
    # cancellation near theta = +-e_1.
    u = theta.copy()
    u[0] += 1.0 if theta[0] >= 0 else -1.0
    H = np.eye(n) - 2.0 * np.outer(u, u) / (u @ u)
    rows[1:, 0] = 0.0
    rows[1:, 1:] = H[:, 1:].T
    return rows


def rotation_to_e2(zeta_prime: np.ndarray) -> np.ndarray:
    """Deterministic orthogonal matrix A with A @ zeta_prime = e_2.

    Built from Householder reflections with the sign fixed so no
    cancellation occurs near zeta_prime = e_2, where A tends to the
    identity.
    """
    zp = np.asarray(zeta_prime, dtype=np.float64)
    n = zp.shape[0]
    if abs(np.linalg.norm(zp) - 1.0) > _UNIT_TOL:
        raise ValueError("rotation_to_e2 expects a unit vector")
    e2 = np.zeros(n)
    e2[1] = 1.0
    if zp @ e2 > -0.5:
        u = zp + e2  # reflect zp <-> -e2, then flip the e2 axis
        H = np.eye(n) - 2.0 * np.outer(u, u) / (u @ u)
        H[1] = -H[1]
        return H
    u = zp - e2
    return np.eye(n) - 2.0 * np.outer(u, u) / (u @ u)


def direction_family(kind, phi: float, a: float, A: np.ndarray) -> Direction:
    """Member of the rotated perturbation family of directions.

    kind is a single index k or a pair (k, l) with 3 <= k < l <= n; the
    unrotated direction is cos(a)cos(phi) e1 + sin(phi) e2 plus
    sin(a)cos(phi) along e_k (or (e_k + e_l)/sqrt(2)); the result is A^T
    applied to it.
    """
    A = np.asarray(A, dtype=np.float64)
    n = A.shape[0]
    base = np.zeros(n)
    base[0] = np.cos(a) * np.cos(phi)
    base[1] = np.sin(phi)
    ks = (kind,) if np.isscalar(kind) else tuple(kind)
    if len(ks) == 1:
        k = ks[0]
        if not 3 <= k <= n:
            raise ValueError(f"family index k={k} outside 3..{n}")
        base[k - 1] = np.sin(a) * np.cos(phi)
    elif len(ks) == 2:
        k, l = ks
        if not 3 <= k < l <= n:
            raise ValueError(f"family pair ({k},{l}) outside 3 <= k < l <= {n}")
        base[k - 1] = np.sin(a) * np.cos(phi) / np.sqrt(2.0)
        base[l - 1] = np.sin(a) * np.cos(phi) / np.sqrt(2.0)
    else:
        raise ValueError("kind must be an index or a pair")
    return Direction(A.T @ base)


def light_weights(d: Direction) -> np.ndarray:
    """Contraction weights per stored component: mu_ij * tilde_i * tilde_j."""
    t = d.tilde
    return np.array([(1.0 if i == j else 2.0) * t[i] * t[j] for i, j in component_pairs(d.n)])


def contracted_scalar(f: SymTensorField, d: Direction) -> np.ndarray:
    """Pointwise contraction of the field with (1, theta) twice."""
    w = light_weights(d)
    return np.tensordot(w, f.components, axes=(0, 0))


@dataclass(frozen=True)
class RayGeometry:
    """Quadrature layout for rays in one direction.

    s_extent is the half-length of the s-interval around s_center; the
    basis spans (1, theta)^perp.
    """

    direction: Direction
    basis: np.ndarray
    s_step: float
    s_extent: float
    s_center: float = 0.0

    def __post_init__(self):
        B = np.ascontiguousarray(self.basis, dtype=np.float64)
        tl = self.direction.tilde
        gram = B @ B.T
        if np.abs(gram - np.eye(B.shape[0])).max() > _UNIT_TOL:
            raise ValueError("perp basis is not orthonormal")
        if np.abs(B @ tl).max() > _UNIT_TOL:
            raise ValueError("perp basis is not orthogonal to (1, theta)")
        B.setflags(write=False)
        object.__setattr__(self, "basis", B)

    @classmethod
    def for_grid(cls, grid: Grid, d: Direction, reach: float = 0.0) -> "RayGeometry":
        """Geometry whose quadrature interval covers the grid from starting
        points up to `reach` away from the grid center."""
        s_step = min(grid.spacing) / 2.0
        radius = 1.1 * grid.circumradius + reach
        s_extent = radius / np.sqrt(2.0) + 2.0 * s_step
        return cls(d, perp_basis(d), s_step, s_extent)

    @property
    def nsteps(self) -> int:
        return max(2, int(np.ceil(2.0 * self.s_extent / self.s_step)))

    def sample_parameters(self) -> tuple[float, float, int]:
        """(s_start, effective step, nsteps) of the trapezoid rule."""
        nst = self.nsteps
        return self.s_center - self.s_extent, 2.0 * self.s_extent / nst, nst


def _ray_sums_points(f: SymTensorField, geom: RayGeometry, starts: np.ndarray) -> np.ndarray:
    """Quadrature of the contracted field along rays from the given starts."""
    grid = f.grid
    g = contracted_scalar(f, geom.direction)
    s0, ds, nst = geom.sample_parameters()
    tilde = geom.direction.tilde
    h = np.asarray(grid.spacing)
    start_idx = grid.to_index_coords(starts + s0 * tilde)
    step_idx = ds * tilde / h
    return kernels.ray_sums(g, np.atleast_2d(start_idx), step_idx, nst, ds)


def light_ray_integral(f: SymTensorField, point, d: Direction,
                       geometry: RayGeometry | None = None) -> float:
    """Light ray transform of the field through one point.

    The field must carry the compact support flag; rays missing the
    support integrate to (approximately) zero.
    """
    if not f.supported:
        raise ValueError("light_ray_integral needs a compactly supported field")
    p = np.asarray(point, dtype=np.float64)
    if geometry is None:
        reach = float(np.linalg.norm(p - f.grid.center))
        geometry = RayGeometry.for_grid(f.grid, d, reach=reach)
    return float(_ray_sums_points(f, geometry, p[np.newaxis])[0])


@dataclass
class Slab:
    """Light ray transform sampled on a lattice in (1, theta)^perp.

    Lattice point with index (i_1..i_n) sits at
    center + sum_r (lattice_origin[r] + i_r * spacing) * basis[r].
    """

    direction: Direction
    basis: np.ndarray
    center: np.ndarray
    lattice_origin: np.ndarray
    spacing: float
    values: np.ndarray
    covered: bool = True
    geometry: RayGeometry | None = field(default=None, repr=False)

    def lattice_coords(self, axis: int) -> np.ndarray:
        return self.lattice_origin[axis] + self.spacing * np.arange(self.values.shape[axis])

    def lattice_points(self) -> np.ndarray:
        """All lattice points in R^{1+n}, shape (*lattice_shape, 1+n)."""
        grids = np.meshgrid(*[self.lattice_coords(r) for r in range(len(self.lattice_origin))],
                            indexing="ij")
        coords = np.stack(grids, axis=-1)
        return self.center + coords @ self.basis


@dataclass(frozen=True)
class LatticeSpec:
    """Uniform lattice request: half-extent per axis and spacing."""

    half_extent: float
    spacing: float


def _support_ball(f: SymTensorField) -> tuple[np.ndarray, float]:
    """Center and radius of a ball around the nonzero samples of the field."""
    mask = np.any(f.components != 0.0, axis=0)
    if not mask.any():
        return f.grid.center, 0.0
    idx = np.nonzero(mask)
    lo = np.array([ix.min() for ix in idx])
    hi = np.array([ix.max() for ix in idx])
    h = np.asarray(f.grid.spacing)
    c_lo = f.grid.box_lo + lo * h
    c_hi = f.grid.box_lo + hi * h
    center = 0.5 * (c_lo + c_hi)
    return center, 0.5 * float(np.linalg.norm(c_hi - c_lo))


def transform_slab(f: SymTensorField, d: Direction,
                   lattice_spec: LatticeSpec | None = None) -> Slab:
    """Evaluate the light ray transform on a hyperplane lattice.

    The lattice is centered on the projection of the support onto
    (1, theta)^perp.  When the requested lattice does not cover the
    projected support the slab is returned with covered=False.
    """
    if not f.supported:
        raise ValueError("transform_slab needs a compactly supported field")
    grid = f.grid
    n = grid.n
    B = perp_basis(d)
    tilde = d.tilde

    sup_center, sup_radius = _support_ball(f)
    d_lattice = min(grid.spacing)
    if lattice_spec is None:
        lattice_spec = LatticeSpec(half_extent=sup_radius + 2.0 * d_lattice, spacing=d_lattice)
    covered = lattice_spec.half_extent >= sup_radius - 1e-12
    if not covered:
        log.warning("slab lattice half-extent %.3g below projected support radius %.3g",
                    lattice_spec.half_extent, sup_radius)

    dlat = lattice_spec.spacing
    npts = 2 * int(np.ceil(lattice_spec.half_extent / dlat)) + 1
    coord0 = -dlat * (npts - 1) / 2.0
    # hyperplane point closest to the support center, and the ray parameter
    # at which rays from the lattice pass that center
    center = sup_center - 0.5 * (sup_center @ tilde) * tilde
    s_center = 0.5 * (sup_center @ tilde)

    # |l + s*tilde - sup_center|^2 = |c|^2 + 2 (s - s_center)^2, so the
    # quadrature only needs |s - s_center| <= radius/sqrt(2)
    s_extent = sup_radius / np.sqrt(2.0)
    s_step = d_lattice / 2.0
    geom = RayGeometry(d, B, s_step, 1.05 * s_extent + 2.0 * s_step, s_center=s_center)

    axes = [coord0 + dlat * np.arange(npts) for _ in range(n)]
    mesh = np.meshgrid(*axes, indexing="ij")
    coords = np.stack([m.ravel() for m in mesh], axis=-1)
    starts = center + coords @ B
    vals = _ray_sums_points(f, geom, starts).reshape((npts,) * n)
    return Slab(direction=d, basis=B, center=center,
                lattice_origin=np.full(n, coord0), spacing=dlat,
                values=vals, covered=covered, geometry=geom)
