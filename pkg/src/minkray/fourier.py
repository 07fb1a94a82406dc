"""Fourier transforms of tensor fields and both sides of the slice identity.

The transform approximates the continuum integral with sign convention
exp(-i z.zeta): a Riemann sum over grid samples scaled by the cell volume.
With that normalization the hyperplane Fourier integral of slab data
equals sqrt(2) times the contracted tensor spectrum for frequencies in
(1, theta)^perp.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid_field import Grid, SymTensorField, num_components
from .lightray import Direction, Slab, light_weights

__all__ = [
    "SpectralTensor",
    "SpectralField",
    "HyperplaneError",
    "dft_field",
    "inverse_dft_field",
    "dft_at",
    "contract_light",
    "slice_via_data",
    "slice_residual",
    "field_scale",
]


class HyperplaneError(ValueError):
    """Frequency not in the hyperplane (1, theta)^perp."""


@dataclass(frozen=True)
class SpectralTensor:
    """Tensor Fourier coefficients at a single frequency, upper-lex order."""

    zeta: np.ndarray
    coeffs: np.ndarray

    def __post_init__(self):
        z = np.ascontiguousarray(self.zeta, dtype=np.float64)
        c = np.ascontiguousarray(self.coeffs, dtype=np.complex128)
        d = z.shape[0]
        if c.shape != (d * (d + 1) // 2,):
            raise ValueError("coefficient count does not match the dimension")
        z.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "zeta", z)
        object.__setattr__(self, "coeffs", c)

    @property
    def n(self) -> int:
        return self.zeta.shape[0] - 1


@dataclass
class SpectralField:
    """Tensor spectrum on the centered dual lattice of a grid."""

    grid: Grid
    freqs: tuple[np.ndarray, ...]
    coeffs: np.ndarray

    def __post_init__(self):
        m = num_components(self.grid.n)
        if self.coeffs.shape != (m, *self.grid.shape):
            raise ValueError("spectral coefficients do not match the grid")

    def at_index(self, index) -> SpectralTensor:
        zeta = np.array([self.freqs[ax][i] for ax, i in enumerate(index)])
        return SpectralTensor(zeta, self.coeffs[(slice(None), *index)])


def _axis_freqs(grid: Grid) -> list[np.ndarray]:
    return [2.0 * np.pi * np.fft.fftshift(np.fft.fftfreq(N, d=h))
            for N, h in zip(grid.shape, grid.spacing)]


def _origin_phase(grid: Grid, freqs) -> list[np.ndarray]:
    return [np.exp(-1j * grid.origin[ax] * freqs[ax]) for ax in range(grid.n + 1)]


def dft_field(f: SymTensorField) -> SpectralField:
    """Discrete approximation of the continuum Fourier transform.

    Frequencies are 2*pi*k/(N*h) per axis, centered around zero.
    """
    if not f.supported:
        raise ValueError("dft_field needs a compactly supported field")
    g = f.grid
    freqs = _axis_freqs(g)
    coeffs = np.fft.fftshift(np.fft.fftn(f.components, axes=tuple(range(1, g.n + 2))),
                             axes=tuple(range(1, g.n + 2))).astype(np.complex128)
    coeffs *= g.cell_volume
    for ax, ph in enumerate(_origin_phase(g, freqs)):
        shape = [1] * (g.n + 2)
        shape[ax + 1] = ph.shape[0]
        coeffs *= ph.reshape(shape)
    return SpectralField(g, tuple(freqs), coeffs)


def inverse_dft_field(s: SpectralField, supported: bool = False) -> SymTensorField:
    """Inverse of dft_field back to a real spatial field."""
    g = s.grid
    coeffs = s.coeffs.copy()
    for ax, ph in enumerate(_origin_phase(g, s.freqs)):
        shape = [1] * (g.n + 2)
        shape[ax + 1] = ph.shape[0]
        coeffs /= ph.reshape(shape)
    spatial = np.fft.ifftn(np.fft.ifftshift(coeffs, axes=tuple(range(1, g.n + 2))),
                           axes=tuple(range(1, g.n + 2)))
    spatial /= g.cell_volume
    imag = np.abs(spatial.imag).max()
    scale = max(np.abs(spatial.real).max(), 1e-300)
    if imag > 1e-8 * scale:
        raise ValueError(f"spectrum is not Hermitian: imaginary part {imag:.3e}")
    return SymTensorField(g, spatial.real, supported=supported)


def dft_at(f: SymTensorField, zeta) -> SpectralTensor:
    """Direct (non-fast) Fourier sum of every component at one frequency."""
    g = f.grid
    zeta = np.asarray(zeta, dtype=np.float64)
    acc = f.components.astype(np.complex128)
    for ax in range(g.n + 1):
        phase = np.exp(-1j * zeta[ax] * g.axis_coords(ax))
        acc = np.tensordot(acc, phase, axes=([1], [0]))
    return SpectralTensor(zeta, acc * g.cell_volume)


def contract_light(d: Direction, s: SpectralTensor) -> complex:
    """Contraction of the spectral tensor with (1, theta) twice."""
    return complex(light_weights(d) @ s.coeffs)


def project_to_hyperplane(d: Direction, zeta, tol: float = 1e-10) -> np.ndarray:
    """Project zeta onto (1, theta)^perp; reject if it is farther than tol."""
    zeta = np.asarray(zeta, dtype=np.float64)
    tilde = d.tilde
    off = (zeta @ tilde) / 2.0
    if abs(off) * np.sqrt(2.0) > tol * max(1.0, np.linalg.norm(zeta)):
        raise HyperplaneError(
            f"zeta is {abs(off) * np.sqrt(2.0):.3e} away from (1, theta)^perp")
    return zeta - off * tilde


def slice_via_data(slab: Slab, d: Direction, zeta) -> complex:
    """Hyperplane Fourier integral of slab data, times sqrt(2)."""
    zeta = project_to_hyperplane(d, zeta)
    w = slab.basis @ zeta
    n = w.shape[0]
    acc = slab.values.astype(np.complex128)
    for ax in range(n):
        phase = np.exp(-1j * w[ax] * slab.lattice_coords(ax))
        acc = np.tensordot(acc, phase, axes=([0], [0]))
    value = acc * np.exp(-1j * (slab.center @ zeta)) * slab.spacing ** n
    return complex(np.sqrt(2.0) * value)


def field_scale(f: SymTensorField) -> float:
    """L1 mass of the field; an upper bound for any Fourier coefficient."""
    return float(np.abs(f.components).sum() * f.grid.cell_volume)


def slice_residual(f: SymTensorField, d: Direction, zeta,
                   slab: Slab | None = None) -> float:
    """Relative mismatch between the two sides of the slice identity."""
    if slab is None:
        from .lightray import transform_slab
        slab = transform_slab(f, d)
    spectral = contract_light(d, dft_at(f, zeta))
    data = slice_via_data(slab, d, zeta)
    floor = 1e-12 * field_scale(f)
    return abs(spectral - data) / max(abs(spectral), abs(data), floor, 1e-300)
