"""Per-frequency linear systems for spectral recovery near one direction.

For a space-like frequency the contracted spectrum along a perturbation
family of light directions is a trigonometric polynomial of degree 2 in
the perturbation angle.  Its value and first four derivatives at angle
zero give five equations per family; the divergence and trace conditions
add n+2 more.  Solving the stacked system recovers all tensor Fourier
coefficients at that frequency.
"""

from __future__ import annotations

import json
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .fourier import slice_via_data
from .grid_field import component_index, component_pairs, num_components
from .lightray import Direction, direction_family, rotation_to_e2, transform_slab

__all__ = [
    "TrigCoeffs",
    "FrequencySystem",
    "ConeSpec",
    "ConeResult",
    "RankDeficiencyError",
    "trig_coefficients",
    "directional_rows",
    "constraint_rows",
    "constraint_matrix",
    "frame_for",
    "default_families",
    "assemble_system",
    "solve_frequency",
    "determinant_map",
    "cone_zetas",
    "cone_sweep",
    "SlabSliceProvider",
    "save_cone_records",
    "load_cone_records",
    "DEFAULT_FIT_ANGLES",
]

# Derivatives at a = 0 of the basis {1, cos a, sin a, cos 2a, sin 2a},
# rows are derivative orders 0..4.
TRIG_DERIVS = np.array([
    [1.0, 1.0, 0.0, 1.0, 0.0],
    [0.0, 0.0, 1.0, 0.0, 2.0],
    [0.0, -1.0, 0.0, -4.0, 0.0],
    [0.0, 0.0, -1.0, 0.0, -8.0],
    [0.0, 1.0, 0.0, 16.0, 0.0],
])

# Fixed scaling applied to the five derivative rows; with it the rows at
# the reference frame have small integer coefficients.
ROW_SCALE = np.array([1.0, 0.5, -0.5, -0.5, 0.5])

DEFAULT_FIT_ANGLES = np.linspace(-0.2, 0.2, 7)


class RankDeficiencyError(RuntimeError):
    """System rank fell below the number of unknowns."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class TrigCoeffs:
    """Spatial direction components as A_i(a) = const + cos_c*cos(a) + sin_c*sin(a)."""

    const: np.ndarray
    cos_c: np.ndarray
    sin_c: np.ndarray
    family: tuple
    phi: float

    def __post_init__(self):
        at0 = self.const + self.cos_c
        if abs(at0 @ at0 - 1.0) > 1e-12:
            raise ValueError("direction at a=0 is not a unit vector")

    @property
    def n(self) -> int:
        return self.const.shape[0]

    def tilde_triples(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Triples including the constant time component (1, 0, 0)."""
        return (np.concatenate([[1.0], self.const]),
                np.concatenate([[0.0], self.cos_c]),
                np.concatenate([[0.0], self.sin_c]))

    def direction(self, a: float) -> Direction:
        return Direction(self.const + self.cos_c * np.cos(a) + self.sin_c * np.sin(a))


def default_families(n: int) -> list[tuple]:
    singles = [(k,) for k in range(3, n + 1)]
    pairs = list(combinations(range(3, n + 1), 2))
    return singles + pairs


def trig_coefficients(family, phi: float, A: np.ndarray) -> TrigCoeffs:
    """Trigonometric coefficients of a rotated perturbation family."""
    A = np.asarray(A, dtype=np.float64)
    n = A.shape[0]
    fam = (family,) if np.isscalar(family) else tuple(family)
    if len(fam) == 1:
        k = fam[0]
        if not 3 <= k <= n:
            raise ValueError(f"family index k={k} outside 3..{n}")
        q = A[k - 1] * np.cos(phi)
    elif len(fam) == 2:
        k, l = fam
        if not 3 <= k < l <= n:
            raise ValueError(f"family pair ({k},{l}) outside 3 <= k < l <= {n}")
        q = (A[k - 1] + A[l - 1]) * np.cos(phi) / np.sqrt(2.0)
    else:
        raise ValueError("family must be an index or a pair")
    return TrigCoeffs(const=A[1] * np.sin(phi), cos_c=A[0] * np.cos(phi),
                      sin_c=q, family=fam, phi=float(phi))


def _product_table(ct: np.ndarray, pt: np.ndarray, qt: np.ndarray) -> np.ndarray:
    """Coefficients of mu_ij * A~_i(a) * A~_j(a) in the degree-2 trig basis.

    Row per stored component, columns in the order {1, cos a, sin a,
    cos 2a, sin 2a}.  Exact polynomial algebra; no numerical
    differentiation anywhere.
    """
    n = ct.shape[0] - 1
    m = num_components(n)
    table = np.empty((m, 5))
    for k, (i, j) in enumerate(component_pairs(n)):
        mu = 1.0 if i == j else 2.0
        table[k, 0] = mu * (ct[i] * ct[j] + 0.5 * (pt[i] * pt[j] + qt[i] * qt[j]))
        table[k, 1] = mu * (ct[i] * pt[j] + ct[j] * pt[i])
        table[k, 2] = mu * (ct[i] * qt[j] + ct[j] * qt[i])
        table[k, 3] = mu * 0.5 * (pt[i] * pt[j] - qt[i] * qt[j])
        table[k, 4] = mu * 0.5 * (pt[i] * qt[j] + pt[j] * qt[i])
    return table


def rows_from_triples(ct: np.ndarray, pt: np.ndarray, qt: np.ndarray) -> np.ndarray:
    """Scaled derivative rows for raw component triples (time row included)."""
    return ROW_SCALE[:, None] * (TRIG_DERIVS @ _product_table(ct, pt, qt).T)


def directional_rows(tc: TrigCoeffs) -> np.ndarray:
    """Five rows: scaled a-derivatives (orders 0..4) of the contracted form."""
    return rows_from_triples(*tc.tilde_triples())


def derivative_rhs(values: np.ndarray, angles: np.ndarray) -> np.ndarray:
    """Scaled derivative data extracted from sampled slice values.

    Fits the samples to the degree-2 trig basis by least squares and
    differentiates the fit, mirroring directional_rows.
    """
    angles = np.asarray(angles, dtype=np.float64)
    if angles.shape[0] < 5:
        raise ValueError("need at least 5 sample angles")
    design = np.stack([np.ones_like(angles), np.cos(angles), np.sin(angles),
                       np.cos(2 * angles), np.sin(2 * angles)], axis=1)
    coef, *_ = np.linalg.lstsq(design, np.asarray(values, dtype=np.complex128), rcond=None)
    return ROW_SCALE * (TRIG_DERIVS @ coef)


def constraint_matrix(vec: np.ndarray, n: int) -> np.ndarray:
    """Divergence rows for an arbitrary symbol vector plus the trace row."""
    vec = np.asarray(vec, dtype=np.float64)
    m = num_components(n)
    rows = np.zeros((n + 2, m))
    for i in range(n + 1):
        for j in range(n + 1):
            rows[i, component_index(i, j, n)] += vec[j]
    for i in range(n + 1):
        rows[n + 1, component_index(i, i, n)] = 1.0
    return rows


def constraint_rows(zeta) -> np.ndarray:
    """Frequency-domain divergence and trace conditions at one frequency."""
    zeta = np.asarray(zeta, dtype=np.float64)
    if np.linalg.norm(zeta) == 0.0:
        raise ValueError("constraint rows at zeta = 0 are degenerate")
    return constraint_matrix(zeta, zeta.shape[0] - 1)


def frame_for(zeta) -> tuple[float, np.ndarray]:
    """Angle phi and rotation A tying the direction families to zeta.

    sin(phi) = -zeta_0/|zeta'| and A maps the unit spatial part to e_2, so
    every family direction satisfies (1, Theta(phi, a)) . zeta = 0.
    """
    zeta = np.asarray(zeta, dtype=np.float64)
    z0 = zeta[0]
    r = np.linalg.norm(zeta[1:])
    if abs(z0) >= r:
        raise ValueError(f"zeta with |zeta0|={abs(z0):.3g} >= |zeta'|={r:.3g} is not space-like")
    phi = float(np.arcsin(-z0 / r))
    return phi, rotation_to_e2(zeta[1:] / r)


@dataclass
class FrequencySystem:
    """Stacked directional and constraint equations at one frequency."""

    zeta: np.ndarray
    rows: np.ndarray
    rhs: np.ndarray
    tags: list[str]
    phi: float
    rotation: np.ndarray
    families: list[tuple]

    @property
    def n(self) -> int:
        return self.zeta.shape[0] - 1

    @property
    def num_unknowns(self) -> int:
        return num_components(self.n)


def assemble_system(zeta, theta0_frame=None, families=None,
                    data_provider=None, fit_angles=None) -> FrequencySystem:
    """Build the recovery system in the tensor Fourier coefficients at zeta.

    With a data_provider (a callable (Direction, zeta) -> complex measured
    slice value) the directional right-hand sides come from a trig fit of
    the sampled values; otherwise they are zero.  Constraint rows always
    have zero right-hand side.
    """
    zeta = np.asarray(zeta, dtype=np.float64)
    n = zeta.shape[0] - 1
    phi, A = frame_for(zeta) if theta0_frame is None else theta0_frame
    if families is None:
        families = default_families(n)
    if fit_angles is None:
        fit_angles = DEFAULT_FIT_ANGLES

    probe = trig_coefficients(families[0], phi, A).direction(0.0)
    if abs(np.concatenate([[1.0], probe.theta]) @ zeta) > 1e-10 * max(1.0, np.linalg.norm(zeta)):
        raise ValueError("frame is inconsistent: (1, Theta(phi, 0)) . zeta != 0")

    blocks, rhs_blocks, tags = [], [], []
    for fam in families:
        tc = trig_coefficients(fam, phi, A)
        blocks.append(directional_rows(tc))
        name = "k" + "".join(str(k) for k in fam)
        tags.extend(f"dir[{name}]d{r}" for r in range(5))
        if data_provider is None:
            rhs_blocks.append(np.zeros(5, dtype=np.complex128))
        else:
            samples = np.array([data_provider(tc.direction(a), zeta) for a in fit_angles],
                               dtype=np.complex128)
            rhs_blocks.append(derivative_rhs(samples, fit_angles))
    blocks.append(constraint_rows(zeta))
    tags.extend([f"div[{i}]" for i in range(n + 1)] + ["trace"])
    rhs_blocks.append(np.zeros(n + 2, dtype=np.complex128))

    return FrequencySystem(zeta=zeta, rows=np.vstack(blocks),
                           rhs=np.concatenate(rhs_blocks), tags=tags,
                           phi=phi, rotation=A, families=list(families))


def solve_frequency(system: FrequencySystem):
    """Least-squares solution of the system with a conditioning report.

    Rows are normalized to unit Euclidean norm before solving.  Raises
    RankDeficiencyError when the normalized matrix has rank below the
    number of unknowns.
    """
    from .fourier import SpectralTensor

    m = system.num_unknowns
    norms = np.linalg.norm(system.rows, axis=1)
    norms[norms == 0.0] = 1.0
    mat = system.rows / norms[:, None]
    rhs = system.rhs / norms
    sv = np.linalg.svd(mat, compute_uv=False)
    sigma_min = float(sv[m - 1]) if sv.shape[0] >= m else 0.0
    report = {
        "sigma_min": sigma_min,
        "cond": float(sv[0] / sigma_min) if sigma_min > 0 else np.inf,
        "rank": int(np.sum(sv > sv[0] * max(mat.shape) * np.finfo(float).eps)),
        "rows": mat.shape[0],
    }
    if report["rank"] < m:
        raise RankDeficiencyError(
            f"rank {report['rank']} below {m} unknowns at zeta={system.zeta}", report)
    sol, res, *_ = np.linalg.lstsq(mat.astype(np.complex128), rhs, rcond=None)
    report["residual"] = float(np.linalg.norm(mat @ sol - rhs))
    return SpectralTensor(system.zeta, sol), report


# ---------------------------------------------------------------------------
# determinant continuity map (n = 3)
# ---------------------------------------------------------------------------

def _zeta_from_angles(alpha, beta, phi):
    """Space-like frequencies (-sin phi, sin a cos b, cos a, sin a sin b)."""
    sa, ca = np.sin(alpha), np.cos(alpha)
    sb, cb = np.sin(beta), np.cos(beta)
    return np.stack([-np.sin(phi) * np.ones_like(sa), sa * cb, ca, sa * sb], axis=-1)


@dataclass
class DeterminantMap:
    alphas: np.ndarray
    betas: np.ndarray
    phis: np.ndarray
    values: np.ndarray

    @property
    def min_abs(self) -> float:
        return float(self.values.min())


def determinant_map(alpha_half=0.1, beta_half=0.1, phi_half=0.1,
                    resolution=21) -> DeterminantMap:
    """|det| of the 10x10 system over a parameter box around the reference.

    Batched over the box; every matrix is identical to what
    assemble_system builds at the corresponding frequency.
    """
    alphas = np.linspace(-alpha_half, alpha_half, resolution)
    betas = np.linspace(-beta_half, beta_half, resolution)
    phis = np.linspace(-phi_half, phi_half, resolution)
    AA, BB, PP = np.meshgrid(alphas, betas, phis, indexing="ij")
    zetas = _zeta_from_angles(AA.ravel(), BB.ravel(), PP.ravel())
    K = zetas.shape[0]

    zp = zetas[:, 1:]
    # batched rotation_to_e2; within the box zp . e2 = cos(alpha) > 0, so a
    # single Householder branch applies
    if np.any(zp[:, 1] <= -0.5):
        raise ValueError("parameter box too wide for the batched rotation")
    u = zp.copy()
    u[:, 1] += 1.0
    H = -2.0 * u[:, :, None] * u[:, None, :] / np.einsum("ki,ki->k", u, u)[:, None, None]
    H[:, 0, 0] += 1.0
    H[:, 1, 1] += 1.0
    H[:, 2, 2] += 1.0
    H[:, 1, :] *= -1.0
    A = H

    phi = np.arcsin(-zetas[:, 0])
    cphi, sphi = np.cos(phi), np.sin(phi)
    const = A[:, 1, :] * sphi[:, None]
    cos_c = A[:, 0, :] * cphi[:, None]
    sin_c = A[:, 2, :] * cphi[:, None]

    one = np.ones(K)
    zero = np.zeros(K)
    ct = np.concatenate([one[:, None], const], axis=1)
    pt = np.concatenate([zero[:, None], cos_c], axis=1)
    qt = np.concatenate([zero[:, None], sin_c], axis=1)

    n = 3
    m = num_components(n)
    table = np.empty((K, m, 5))
    for k, (i, j) in enumerate(component_pairs(n)):
        mu = 1.0 if i == j else 2.0
        table[:, k, 0] = mu * (ct[:, i] * ct[:, j] + 0.5 * (pt[:, i] * pt[:, j] + qt[:, i] * qt[:, j]))
        table[:, k, 1] = mu * (ct[:, i] * pt[:, j] + ct[:, j] * pt[:, i])
        table[:, k, 2] = mu * (ct[:, i] * qt[:, j] + ct[:, j] * qt[:, i])
        table[:, k, 3] = mu * 0.5 * (pt[:, i] * pt[:, j] - qt[:, i] * qt[:, j])
        table[:, k, 4] = mu * 0.5 * (pt[:, i] * qt[:, j] + pt[:, j] * qt[:, i])

    mats = np.empty((K, m, m))
    mats[:, :5, :] = ROW_SCALE[None, :, None] * np.einsum("rb,kmb->krm", TRIG_DERIVS, table)
    cons = np.zeros((K, n + 2, m))
    for i in range(n + 1):
        for j in range(n + 1):
            cons[:, i, component_index(i, j, n)] += zetas[:, j]
    for i in range(n + 1):
        cons[:, n + 1, component_index(i, i, n)] = 1.0
    mats[:, 5:, :] = cons

    values = np.abs(np.linalg.det(mats)).reshape(resolution, resolution, resolution)
    return DeterminantMap(alphas, betas, phis, values)


# ---------------------------------------------------------------------------
# cone sweep
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConeSpec:
    """Angular box around the reference frequency plus radial scales (n = 3)."""

    alpha_half: float = 0.08
    beta_half: float = 0.08
    phi_half: float = 0.08
    counts: tuple[int, int, int] = (3, 3, 3)
    radial_scales: tuple[float, ...] = (2.0, 3.0, 4.0, 5.0)


def cone_zetas(spec: ConeSpec) -> list[np.ndarray]:
    """Frequencies of the sweep, grouped so equal directions are adjacent."""
    out = []
    for alpha in np.linspace(-spec.alpha_half, spec.alpha_half, spec.counts[0]):
        for beta in np.linspace(-spec.beta_half, spec.beta_half, spec.counts[1]):
            for phi in np.linspace(-spec.phi_half, spec.phi_half, spec.counts[2]):
                unit = _zeta_from_angles(np.array(alpha), np.array(beta), np.array(phi))
                for lam in spec.radial_scales:
                    out.append(lam * unit)
    return out


@dataclass
class ConeResult:
    zeta: np.ndarray
    coeffs: np.ndarray | None
    sigma_min: float
    cond: float
    ok: bool
    message: str = ""


class SlabSliceProvider:
    """Measured slice values from slabs of one field, cached per direction.

    Callable as provider(direction, zeta); safe to call from concurrent
    workers (read-only field, locked cache).
    """

    def __init__(self, f, lattice_spec=None, noise_sigma: float = 0.0, seed: int = 0):
        self.field = f
        self.lattice_spec = lattice_spec
        self.noise_sigma = noise_sigma
        self._rng = np.random.default_rng(seed)
        self._cache: dict[tuple, object] = {}
        self._lock = threading.Lock()

    def slab_for(self, d: Direction):
        key = tuple(np.round(d.theta, 14))
        with self._lock:
            slab = self._cache.get(key)
        if slab is None:
            slab = transform_slab(self.field, d, self.lattice_spec)
            if self.noise_sigma > 0.0:
                scale = np.abs(slab.values).max()
                with self._lock:
                    noise = self._rng.normal(0.0, self.noise_sigma * scale, slab.values.shape)
                slab.values = slab.values + noise
            with self._lock:
                self._cache[key] = slab
        return slab

    def __call__(self, d: Direction, zeta) -> complex:
        return slice_via_data(self.slab_for(d), d, zeta)


def cone_sweep(data_provider, cone_spec: ConeSpec, radial_scales=None,
               fit_angles=None, workers: int = 1) -> list[ConeResult]:
    """Assemble and solve at every cone frequency; failures are recorded."""
    if radial_scales is not None:
        cone_spec = ConeSpec(cone_spec.alpha_half, cone_spec.beta_half,
                             cone_spec.phi_half, cone_spec.counts,
                             tuple(radial_scales))
    zetas = cone_zetas(cone_spec)

    def solve_one(zeta):
        try:
            system = assemble_system(zeta, data_provider=data_provider,
                                     fit_angles=fit_angles)
            spectrum, report = solve_frequency(system)
            return ConeResult(zeta, spectrum.coeffs, report["sigma_min"],
                              report["cond"], True)
        except (RankDeficiencyError, ValueError) as exc:
            report = getattr(exc, "report", None) or {}
            return ConeResult(zeta, None, report.get("sigma_min", 0.0),
                              report.get("cond", np.inf), False, str(exc))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(solve_one, zetas))
    return [solve_one(z) for z in zetas]


def save_cone_records(path, results: list[ConeResult]) -> None:
    """One structured-text record per line: zeta, interleaved coefficients,
    and the conditioning numbers."""
    with open(path, "w", encoding="utf-8") as fh:
        for r in results:
            coeffs = None
            if r.coeffs is not None:
                coeffs = np.stack([r.coeffs.real, r.coeffs.imag], axis=1).ravel().tolist()
            fh.write(json.dumps({
                "zeta": np.asarray(r.zeta).tolist(),
                "coeffs": coeffs,
                "sigma_min": r.sigma_min,
                "cond": r.cond if np.isfinite(r.cond) else None,
                "ok": r.ok,
                "message": r.message,
            }) + "\n")


def load_cone_records(path) -> list[ConeResult]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            rec = json.loads(line)
            coeffs = None
            if rec["coeffs"] is not None:
                flat = np.asarray(rec["coeffs"])
                coeffs = flat[0::2] + 1j * flat[1::2]
            cond = rec["cond"] if rec["cond"] is not None else np.inf
            out.append(ConeResult(np.asarray(rec["zeta"]), coeffs,
                                  rec["sigma_min"], cond, rec["ok"], rec["message"]))
    return out
