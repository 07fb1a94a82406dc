"""Trace/divergence-free decomposition F = F_tilde + lambda*g + dv.

The vector potential solves a strongly elliptic system with zero Dirichlet
data.  The discrete operator is the exact composition of the package's
first-difference operators, so the divergence and trace residuals of the
decomposed field are tied to the linear solver residual rather than to
the discretization error.  For n = 3 the system decouples into three
Poisson problems and one anisotropic scalar problem, all solved directly
by per-axis eigendecompositions; for n >= 4 a preconditioned GMRES (or a
sparse direct factorization on small grids) handles the coupled system.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.optimize
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid_field import (
    Grid,
    ScalarField,
    SymTensorField,
    VectorField,
    diff1,
    divergence,
    scalar_metric,
    sym_derivative,
    trace,
    vector_divergence,
)

__all__ = [
    "EllipticOperator",
    "DecompositionResult",
    "SolverError",
    "alpha_coefficient",
    "beta_coefficient",
    "assemble_rhs",
    "solve_dirichlet",
    "lambda_from_trace",
    "decompose",
    "symbol",
    "ellipticity_certificate",
    "adjoint_residual",
    "energy_identity_residual",
    "random_interior_field",
]


def alpha_coefficient(n: int) -> float:
    return 1.0 + 2.0 / (n - 1)


def beta_coefficient(n: int) -> float:
    return 1.0 - 2.0 / (n - 1)


class SolverError(RuntimeError):
    """Dirichlet solve did not reach the requested residual."""

    def __init__(self, message, info=None):
        super().__init__(message)
        self.info = info or {}


def _signs(n: int) -> np.ndarray:
    eps = np.ones(n + 1)
    eps[0] = -1.0
    return eps


def _d_matrix(npts: int, h: float) -> np.ndarray:
    """Dense 1D first-difference matrix matching diff1."""
    D = np.zeros((npts, npts))
    idx = np.arange(1, npts - 1)
    D[idx, idx - 1] = -0.5 / h
    D[idx, idx + 1] = 0.5 / h
    D[0, :3] = np.array([-3.0, 4.0, -1.0]) / (2.0 * h)
    D[-1, -3:] = np.array([1.0, -4.0, 3.0]) / (2.0 * h)
    return D


class _KroneckerSolver:
    """Direct solver for sum_k w_k * D_k^2 on interior points, zero faces.

    Each 1D factor is eigendecomposed once; a solve is one basis transform
    per axis, a pointwise division, and the transforms back.
    """

    def __init__(self, grid: Grid, weights):
        self.grid = grid
        self.weights = np.asarray(weights, dtype=np.float64)
        self.X, self.Xinv, eigs = [], [], []
        for ax in range(grid.n + 1):
            D = _d_matrix(grid.shape[ax], grid.spacing[ax])
            T = self.weights[ax] * (D @ D)[1:-1, 1:-1]
            w, V = scipy.linalg.eig(T)
            self.X.append(V)
            self.Xinv.append(np.linalg.inv(V))
            eigs.append(w)
        shape = [1] * (grid.n + 1)
        lam = np.zeros([e.shape[0] for e in eigs], dtype=np.complex128)
        for ax, e in enumerate(eigs):
            s = shape.copy()
            s[ax] = e.shape[0]
            lam = lam + e.reshape(s)
        if np.abs(lam).min() == 0.0:
            raise SolverError("composed difference operator is singular on this grid")
        self.lam = lam

    def _transform(self, arr, mats):
        d = arr.ndim
        for ax in range(d):
            arr = np.tensordot(mats[ax], arr, axes=(1, ax))
            arr = np.moveaxis(arr, 0, ax)
        return arr

    def solve(self, rhs_int: np.ndarray) -> np.ndarray:
        u = self._transform(rhs_int.astype(np.complex128), self.Xinv)
        u /= self.lam
        v = self._transform(u, self.X)
        return np.ascontiguousarray(v.real)


class EllipticOperator:
    """Action of the decomposition operator on vector fields, zero Dirichlet.

    Row i applies sum_k D_k^2 plus gamma_i * D_i(div .), with gamma_0 =
    1 + 2/(n-1) and gamma_i = 1 - 2/(n-1) for spatial rows; for n = 3 the
    spatial rows reduce to the plain composed Laplacian.
    """

    def __init__(self, grid: Grid):
        self.grid = grid
        self.n = grid.n
        self.alpha = alpha_coefficient(self.n)
        self.beta = beta_coefficient(self.n)
        self._solvers: dict[tuple, _KroneckerSolver] = {}

    def _laplace(self, comp: np.ndarray) -> np.ndarray:
        out = np.zeros_like(comp)
        for ax in range(self.n + 1):
            h = self.grid.spacing[ax]
            out += diff1(diff1(comp, ax, h), ax, h)
        return out

    def apply(self, varr: np.ndarray) -> np.ndarray:
        """Full-grid action on an (n+1, ...) component array."""
        g = self.grid
        div = np.zeros(g.shape)
        for k in range(self.n + 1):
            div += diff1(varr[k], k, g.spacing[k])
        out = np.empty_like(varr)
        for i in range(self.n + 1):
            gamma = self.alpha if i == 0 else self.beta
            out[i] = self._laplace(varr[i]) + gamma * diff1(div, i, g.spacing[i])
        return out

    def apply_adjoint(self, warr: np.ndarray) -> np.ndarray:
        """Action of the formal adjoint (transposed coefficient pattern)."""
        g = self.grid
        psi = self.alpha * diff1(warr[0], 0, g.spacing[0])
        for k in range(1, self.n + 1):
            psi += self.beta * diff1(warr[k], k, g.spacing[k])
        out = np.empty_like(warr)
        for i in range(self.n + 1):
            out[i] = self._laplace(warr[i]) + diff1(psi, i, g.spacing[i])
        return out

    # -- interior system ----------------------------------------------------

    def embed(self, v_int: np.ndarray) -> np.ndarray:
        full = np.zeros((v_int.shape[0], *self.grid.shape))
        full[(slice(None),) + (slice(1, -1),) * (self.n + 1)] = v_int
        return full

    def restrict(self, varr: np.ndarray) -> np.ndarray:
        return varr[(slice(None),) + (slice(1, -1),) * (self.n + 1)]

    def apply_interior(self, v_int: np.ndarray) -> np.ndarray:
        return self.restrict(self.apply(self.embed(v_int)))

    def kron_solver(self, axis_weights) -> _KroneckerSolver:
        key = tuple(np.round(axis_weights, 12))
        if key not in self._solvers:
            self._solvers[key] = _KroneckerSolver(self.grid, axis_weights)
        return self._solvers[key]

    def sparse_matrix(self) -> sp.csr_matrix:
        """Interior system as a sparse matrix (small grids only)."""
        g = self.grid
        d = self.n + 1
        eye = [sp.identity(g.shape[ax] - 2, format="csr") for ax in range(d)]
        Dint, Tint = [], []
        for ax in range(d):
            D = _d_matrix(g.shape[ax], g.spacing[ax])
            Dint.append(sp.csr_matrix(D[1:-1, 1:-1]))
            Tint.append(sp.csr_matrix((D @ D)[1:-1, 1:-1]))

        def kron_chain(factors):
            out = factors[0]
            for f in factors[1:]:
                out = sp.kron(out, f, format="csr")
            return out

        lap = None
        for ax in range(d):
            term = kron_chain([Tint[ax] if k == ax else eye[k] for k in range(d)])
            lap = term if lap is None else lap + term

        blocks = []
        for i in range(d):
            gamma = self.alpha if i == 0 else self.beta
            row = []
            for j in range(d):
                if i == j:
                    block = lap + gamma * kron_chain(
                        [Tint[ax] if ax == i else eye[ax] for ax in range(d)])
                else:
                    block = gamma * kron_chain(
                        [Dint[ax] if ax in (i, j) else eye[ax] for ax in range(d)])
                row.append(block)
            blocks.append(row)
        return sp.bmat(blocks, format="csc")


def assemble_rhs(f: SymTensorField) -> VectorField:
    """Right-hand side u_i = 2 (div F)_i - (2/(n-1)) eps_i d_i trace(F)."""
    g = f.grid
    n = g.n
    u = 2.0 * divergence(f).components.copy()
    tr = trace(f).values
    eps = _signs(n)
    for i in range(n + 1):
        u[i] -= (2.0 / (n - 1)) * eps[i] * diff1(tr, i, g.spacing[i])
    return VectorField(g, u)


def _solve_n3(op: EllipticOperator, u: np.ndarray, refine: int):
    g = op.grid
    n = op.n
    sl_int = (slice(1, -1),) * (n + 1)
    ones = np.ones(n + 1)
    kron_lap = op.kron_solver(ones)
    v = np.zeros((n + 1, *g.shape))

    # spatial rows are plain composed Laplacians
    for j in range(1, n + 1):
        rhs = u[j][sl_int]
        vj = kron_lap.solve(rhs)
        for _ in range(refine):
            full = np.zeros(g.shape)
            full[sl_int] = vj
            vj = vj + kron_lap.solve(rhs - op._laplace(full)[sl_int])
        v[j][sl_int] = vj

    # time row: anisotropic scalar solve with the coupling moved to the rhs
    w0 = ones.copy()
    w0[0] = 1.0 + op.alpha
    kron0 = op.kron_solver(w0)
    s = np.zeros(g.shape)
    for k in range(1, n + 1):
        s += diff1(v[k], k, g.spacing[k])
    rhs0 = (u[0] - op.alpha * diff1(s, 0, g.spacing[0]))[sl_int]

    def apply0(v0_int):
        full = np.zeros(g.shape)
        full[sl_int] = v0_int
        out = op._laplace(full) + op.alpha * diff1(diff1(full, 0, g.spacing[0]), 0, g.spacing[0])
        return out[sl_int]

    v0 = kron0.solve(rhs0)
    for _ in range(refine):
        v0 = v0 + kron0.solve(rhs0 - apply0(v0))
    v[0][sl_int] = v0
    return v, {"method": "eigen-direct", "iterations": refine + 1}


def _solve_coupled(op: EllipticOperator, u: np.ndarray, rtol, maxiter, method):
    g = op.grid
    n = op.n
    d = n + 1
    sl_int = (slice(1, -1),) * d
    int_shape = tuple(s - 2 for s in g.shape)
    u_int = np.stack([u[i][sl_int] for i in range(d)])
    nint = int(np.prod(int_shape))
    unknowns = d * nint

    if method == "direct" or (method == "auto" and unknowns <= 30000):
        lu = spla.splu(op.sparse_matrix())
        sol = lu.solve(u_int.reshape(-1))
        return sol.reshape(d, *int_shape), {"method": "sparse-direct", "iterations": 1}

    solvers = []
    for i in range(d):
        w = np.ones(d)
        w[i] += op.alpha if i == 0 else op.beta
        solvers.append(op.kron_solver(w))

    def matvec(x):
        return op.apply_interior(x.reshape(d, *int_shape)).reshape(-1)

    def precond(r):
        r = r.reshape(d, *int_shape)
        return np.stack([solvers[i].solve(r[i]) for i in range(d)]).reshape(-1)

    A = spla.LinearOperator((unknowns, unknowns), matvec=matvec)
    M = spla.LinearOperator((unknowns, unknowns), matvec=precond)
    iters = 0

    def count(_):
        nonlocal iters
        iters += 1

    sol, info = spla.gmres(A, u_int.reshape(-1), rtol=rtol, atol=0.0, M=M,
                           maxiter=maxiter, restart=60, callback=count,
                           callback_type="pr_norm")
    return sol.reshape(d, *int_shape), {"method": "gmres", "iterations": iters,
                                        "converged": info == 0}


def solve_dirichlet(op: EllipticOperator, u: VectorField, rtol: float = 1e-11,
                    method: str = "auto", maxiter: int = 400,
                    refine: int = 2) -> tuple[VectorField, dict]:
    """Solve the elliptic system with zero Dirichlet data.

    Returns the solution (exact zeros on the boundary faces) and an info
    dict with the relative residual over the interior equations.  Raises
    SolverError when the residual exceeds 1e-10 relative.
    """
    uarr = u.components
    unorm = np.linalg.norm(uarr[(slice(None),) + (slice(1, -1),) * (op.n + 1)])
    if unorm == 0.0:
        zero = VectorField(op.grid, np.zeros_like(uarr), boundary_zero=True)
        return zero, {"method": "trivial", "iterations": 0, "residual": 0.0}

    if op.n == 3 and method in ("auto", "eigen"):
        v_full, info = _solve_n3(op, uarr, refine)
    else:
        sl_int = (slice(None),) + (slice(1, -1),) * (op.n + 1)
        v_int, info = _solve_coupled(op, uarr, rtol, maxiter, method)
        v_full = np.zeros_like(uarr)
        v_full[sl_int] = v_int

    sl_int = (slice(None),) + (slice(1, -1),) * (op.n + 1)
    resid = np.linalg.norm((op.apply(v_full) - uarr)[sl_int]) / unorm
    info["residual"] = float(resid)
    if resid > 1e-10:
        raise SolverError(f"Dirichlet solve residual {resid:.3e} above 1e-10", info)
    return VectorField(op.grid, v_full, boundary_zero=True), info


def lambda_from_trace(f: SymTensorField, v: VectorField) -> ScalarField:
    """lambda = (trace F - div v) / (n-1)."""
    n = f.grid.n
    return ScalarField(f.grid, (trace(f).values - vector_divergence(v).values) / (n - 1))


@dataclass
class DecompositionResult:
    f_tilde: SymTensorField
    lam: ScalarField
    v: VectorField
    diagnostics: dict


def decompose(f: SymTensorField, rtol: float = 1e-11, method: str = "auto") -> DecompositionResult:
    """Split F into a solenoidal trace-free part plus lambda*g + dv."""
    op = EllipticOperator(f.grid)
    u = assemble_rhs(f)
    v, info = solve_dirichlet(op, u, rtol=rtol, method=method)
    lam = lambda_from_trace(f, v)
    f_tilde = SymTensorField(
        f.grid,
        f.components - scalar_metric(lam).components - sym_derivative(v).components)

    sl_int = (slice(1, -1),) * (f.grid.n + 1)
    scale = max(np.abs(f.components).max(), 1e-300)
    vol = f.grid.cell_volume
    div_resid = np.linalg.norm(divergence(f_tilde).components[(slice(None),) + sl_int]) * np.sqrt(vol)
    trace_resid = np.linalg.norm(trace(f_tilde).values[sl_int]) * np.sqrt(vol)
    diagnostics = {
        "div_residual": float(div_resid / scale),
        "trace_residual": float(trace_resid / scale),
        "solver_residual": info["residual"],
        "iterations": info["iterations"],
        "method": info["method"],
    }
    return DecompositionResult(f_tilde, lam, v, diagnostics)


# ---------------------------------------------------------------------------
# symbol and certificates
# ---------------------------------------------------------------------------

def symbol(xi, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Principal symbol A(xi) and its symmetrization P(xi)."""
    xi = np.asarray(xi, dtype=np.float64)
    if xi.shape != (n + 1,):
        raise ValueError("xi must have 1+n entries")
    if np.linalg.norm(xi) == 0.0:
        raise ValueError("the symbol is evaluated away from xi = 0")
    coef = np.full(n + 1, beta_coefficient(n))
    coef[0] = alpha_coefficient(n)
    A = coef[:, None] * np.outer(xi, xi) + (xi @ xi) * np.eye(n + 1)
    return A, 0.5 * (A + A.T)


def _rayleigh(xi, eta, n):
    _, P = symbol(xi, n)
    return float(eta @ P @ eta) / float((xi @ xi) * (eta @ eta))


def ellipticity_certificate(n: int, sample_count: int = 1_000_000,
                            seed: int = 0) -> dict:
    """Sampled lower bound of the symmetrized symbol's Rayleigh ratio.

    Valid for n >= 4, where the ratio is bounded below by (n-3)/(n-1).
    Samples are refined by a local minimization from the worst point.
    """
    if n < 4:
        raise ValueError("the ellipticity bound degenerates for n=3; "
                         "the decoupled path covers that case")
    rng = np.random.default_rng(seed)
    bound = (n - 3) / (n - 1)
    coef = np.full(n + 1, beta_coefficient(n))
    coef[0] = alpha_coefficient(n)

    best = np.inf
    best_xi = best_eta = None
    chunk = 100_000
    remaining = sample_count
    while remaining > 0:
        k = min(chunk, remaining)
        remaining -= k
        xi = rng.standard_normal((k, n + 1))
        eta = rng.standard_normal((k, n + 1))
        xi2 = np.einsum("ki,ki->k", xi, xi)
        eta2 = np.einsum("ki,ki->k", eta, eta)
        xe = np.einsum("ki,ki->k", xi, eta)
        # eta^T P eta = |xi|^2 |eta|^2 + sum_i c_i (xi_i eta_i)(xi . eta)
        diag = np.einsum("ki,i,ki->k", xi, coef, eta)
        ratios = (xi2 * eta2 + diag * xe) / (xi2 * eta2)
        idx = int(np.argmin(ratios))
        if ratios[idx] < best:
            best = float(ratios[idx])
            best_xi, best_eta = xi[idx].copy(), eta[idx].copy()

    def objective(z):
        xi, eta = z[:n + 1], z[n + 1:]
        if xi @ xi < 1e-12 or eta @ eta < 1e-12:
            return np.inf
        return _rayleigh(xi, eta, n)

    z0 = np.concatenate([best_xi / np.linalg.norm(best_xi),
                         best_eta / np.linalg.norm(best_eta)])
    res = scipy.optimize.minimize(objective, z0, method="Nelder-Mead",
                                  options={"maxiter": 4000, "xatol": 1e-12, "fatol": 1e-14})
    refined = float(min(best, res.fun))
    xi_min = res.x[:n + 1] / np.linalg.norm(res.x[:n + 1])
    eta_min = res.x[n + 1:] / np.linalg.norm(res.x[n + 1:])
    return {
        "n": n,
        "bound": bound,
        "sampled_min": best,
        "refined_min": refined,
        "argmin_xi": xi_min,
        "argmin_eta": eta_min,
        "samples": sample_count,
        "seed": seed,
        "certified": refined >= bound - 1e-9,
    }


def random_interior_field(grid: Grid, ncomp: int, seed: int, margin: int = 2) -> np.ndarray:
    """Random components vanishing on the outer `margin` layers per axis."""
    rng = np.random.default_rng(seed)
    arr = rng.standard_normal((ncomp, *grid.shape))
    for ax in range(1, grid.n + 2):
        sl0 = [slice(None)] * arr.ndim
        sl1 = [slice(None)] * arr.ndim
        sl0[ax] = slice(0, margin)
        sl1[ax] = slice(-margin, None)
        arr[tuple(sl0)] = 0.0
        arr[tuple(sl1)] = 0.0
    return arr


def adjoint_residual(grid: Grid, trials: int = 20, seed: int = 0) -> float:
    """max |<w, Av> - <A*w, v>| / (|v| |w|) over random interior-supported pairs."""
    op = EllipticOperator(grid)
    worst = 0.0
    for t in range(trials):
        v = random_interior_field(grid, grid.n + 1, seed + 2 * t)
        w = random_interior_field(grid, grid.n + 1, seed + 2 * t + 1)
        lhs = float(np.sum(w * op.apply(v)))
        rhs = float(np.sum(v * op.apply_adjoint(w)))
        worst = max(worst, abs(lhs - rhs) / (np.linalg.norm(v) * np.linalg.norm(w)))
    return worst


def energy_identity_residual(v: VectorField) -> float:
    """Residual of the integration-by-parts identity for the operator.

    For boundary-vanishing v the grid sums satisfy
    sum_j |grad v_j|^2 + beta |div v|^2 + (4/(n-1)) <div v, d0 v0> = -<Av, v>.
    Exact to rounding when v vanishes near the faces; normalized by the
    magnitude of the terms.
    """
    g = v.grid
    n = g.n
    if not _vanishes_on_boundary(v):
        raise ValueError("energy identity requires v = 0 on the boundary")
    op = EllipticOperator(g)
    varr = v.components
    grad2 = 0.0
    for i in range(n + 1):
        for k in range(n + 1):
            grad2 += float(np.sum(diff1(varr[i], k, g.spacing[k]) ** 2))
    div = vector_divergence(v).values
    d0v0 = diff1(varr[0], 0, g.spacing[0])
    t_div = beta_coefficient(n) * float(np.sum(div ** 2))
    t_mix = (4.0 / (n - 1)) * float(np.sum(div * d0v0))
    t_op = float(np.sum(varr * op.apply(varr)))
    scale = abs(grad2) + abs(t_div) + abs(t_mix) + 1e-300
    return abs(grad2 + t_div + t_mix + t_op) / scale


def _vanishes_on_boundary(v: VectorField) -> bool:
    arr = v.components
    for ax in range(1, arr.ndim):
        sl0 = [slice(None)] * arr.ndim
        sl1 = [slice(None)] * arr.ndim
        sl0[ax] = 0
        sl1[ax] = -1
        if np.any(arr[tuple(sl0)]) or np.any(arr[tuple(sl1)]):
            return False
    return True
