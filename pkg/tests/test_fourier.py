import numpy as np
import pytest

from minkray.fourier import (
    HyperplaneError,
    SpectralTensor,
    contract_light,
    dft_at,
    dft_field,
    inverse_dft_field,
    slice_residual,
    slice_via_data,
)
from minkray.grid_field import Grid, SymTensorField, component_pairs, num_components
from minkray.lightray import Direction, light_weights, perp_basis, transform_slab
from minkray.phantoms import GaussianSpec, phantom_gauge, phantom_gaussian


def gaussian_field(npts=32, width=0.25, lo=-1.5, hi=1.5, seed=0):
    grid = Grid.box(3, npts, lo, hi)
    rng = np.random.default_rng(seed)
    weights = rng.standard_normal(num_components(3))
    return phantom_gaussian(grid, (0.0,) * 4, width, weights), weights, width


class TestDftField:
    def test_zero_field(self):
        grid = Grid.box(3, 12)
        s = dft_field(SymTensorField.zeros(grid))
        assert np.all(s.coeffs == 0.0)

    def test_dc_term_is_grid_sum(self):
        f, weights, _ = gaussian_field(npts=16)
        s = dft_field(f)
        dc_index = tuple(ss // 2 for ss in f.grid.shape)
        expect = f.components[0].sum() * f.grid.cell_volume
        got = s.at_index(dc_index)
        assert np.allclose(got.zeta, 0.0)
        assert abs(got.coeffs[0] - expect) < 1e-12 * abs(expect)

    def test_gaussian_closed_form_at_low_frequency(self):
        f, weights, width = gaussian_field()
        s = dft_field(f)
        dc = np.asarray(f.grid.shape) // 2
        for offset in ([0, 0, 0, 0], [1, 0, 0, 0], [0, 2, -1, 1], [2, 2, 0, -2]):
            idx = tuple(dc + np.asarray(offset))
            st = s.at_index(idx)
            expect = (np.sqrt(np.pi) * width) ** 4 * np.exp(-width ** 2 * (st.zeta @ st.zeta) / 4.0)
            got = st.coeffs[0] / weights[0]
            assert abs(got - expect) < 1e-3 * abs(expect)

    def test_matches_direct_sum(self):
        f, _, _ = gaussian_field(npts=12, width=0.17, lo=-1.0, hi=1.0)
        s = dft_field(f)
        idx = (3, 7, 5, 8)
        st = s.at_index(idx)
        direct = dft_at(f, st.zeta)
        assert np.abs(st.coeffs - direct.coeffs).max() < 1e-10 * max(1.0, np.abs(st.coeffs).max())

    def test_requires_support(self):
        grid = Grid.box(3, 12)
        f = SymTensorField(grid, np.ones((num_components(3), *grid.shape)))
        with pytest.raises(ValueError, match="support"):
            dft_field(f)

    def test_round_trip(self):
        f, _, _ = gaussian_field(npts=16)
        back = inverse_dft_field(dft_field(f))
        scale = np.abs(f.components).max()
        assert np.abs(back.components - f.components).max() < 1e-10 * scale

    def test_hermitian_symmetry(self):
        f, _, _ = gaussian_field(npts=12)
        s = dft_field(f)
        npts = f.grid.shape[0]
        rng = np.random.default_rng(1)
        for _ in range(20):
            idx = tuple(rng.integers(1, npts, size=4))
            neg = tuple(npts - i for i in idx)
            a = s.at_index(idx)
            b = s.at_index(neg)
            assert np.allclose(a.zeta, -b.zeta, atol=1e-12)
            assert np.abs(a.coeffs - np.conj(b.coeffs)).max() < 1e-10 * max(
                1e-300, np.abs(a.coeffs).max())

    def test_parseval(self):
        f, _, _ = gaussian_field(npts=16)
        g = f.grid
        s = dft_field(f)
        grid_norm2 = np.sum(f.components ** 2) * g.cell_volume
        dzeta = np.prod([2.0 * np.pi / (N * h) for N, h in zip(g.shape, g.spacing)])
        spec_norm2 = np.sum(np.abs(s.coeffs) ** 2) * dzeta / (2.0 * np.pi) ** 4
        assert abs(grid_norm2 - spec_norm2) < 1e-10 * grid_norm2


class TestContractLight:
    def test_metric_spectrum_annihilated(self):
        n = 3
        coeffs = np.zeros(num_components(n), dtype=complex)
        for i in range(n + 1):
            from minkray.grid_field import component_index
            coeffs[component_index(i, i, n)] = (-1.0 if i == 0 else 1.0) * 2.3
        s = SpectralTensor(np.array([0.1, 0.2, 1.0, 0.0]), coeffs)
        rng = np.random.default_rng(2)
        for _ in range(10):
            th = rng.standard_normal(n)
            th /= np.linalg.norm(th)
            assert abs(contract_light(Direction(th), s)) < 1e-12

    def test_single_time_component(self):
        coeffs = np.zeros(10, dtype=complex)
        coeffs[0] = 1.0
        s = SpectralTensor(np.zeros(4), coeffs)
        rng = np.random.default_rng(3)
        for _ in range(5):
            th = rng.standard_normal(3)
            th /= np.linalg.norm(th)
            assert abs(contract_light(Direction(th), s) - 1.0) < 1e-14

    def test_double_loop_oracle(self):
        rng = np.random.default_rng(4)
        coeffs = rng.standard_normal(10) + 1j * rng.standard_normal(10)
        s = SpectralTensor(np.array([0.0, 0.0, 1.0, 0.0]), coeffs)
        d = Direction.axis(3)
        tilde = d.tilde
        expect = 0.0j
        from minkray.grid_field import component_index
        for i in range(4):
            for j in range(4):
                expect += tilde[i] * tilde[j] * coeffs[component_index(i, j, 3)]
        assert abs(contract_light(d, s) - expect) < 1e-13


class TestSliceIdentity:
    def test_zero_slab(self):
        grid = Grid.box(3, 12)
        slab = transform_slab(SymTensorField.zeros(grid), Direction.axis(3))
        B = perp_basis(Direction.axis(3))
        zeta = 2.0 * B[1]
        assert slice_via_data(slab, Direction.axis(3), zeta) == 0.0

    def test_gauge_slab_slice_small(self):
        grid = Grid.box(3, 20, -1.0, 1.0)
        lam = GaussianSpec(0.7, (0.0,) * 4, 0.14)
        vspecs = [GaussianSpec(a, (0.0,) * 4, 0.3) for a in (0.4, -0.3, 0.5, 0.2)]
        f, _, _ = phantom_gauge(grid, lam, vspecs)
        d = Direction.axis(3)
        slab = transform_slab(f, d)
        B = perp_basis(d)
        val = slice_via_data(slab, d, 1.5 * B[1] - 0.5 * B[2])
        from minkray.fourier import field_scale
        assert abs(val) < 1e-2 * field_scale(f)

    def test_rejects_off_hyperplane_frequency(self):
        grid = Grid.box(3, 12)
        d = Direction.axis(3)
        slab = transform_slab(SymTensorField.zeros(grid), d)
        with pytest.raises(HyperplaneError):
            slice_via_data(slab, d, np.array([1.0, 1.0, 0.0, 0.0]))

    def test_two_sided_agreement_gaussian(self):
        f, _, _ = gaussian_field(npts=24)
        rng = np.random.default_rng(5)
        th = rng.standard_normal(3)
        th /= np.linalg.norm(th)
        d = Direction(th)
        B = perp_basis(d)
        slab = transform_slab(f, d)
        for _ in range(5):
            c = rng.uniform(-2.0, 2.0, size=3)
            zeta = c @ B
            r = slice_residual(f, d, zeta, slab=slab)
            assert r < 8e-2

    def test_zero_field_residual(self):
        grid = Grid.box(3, 12)
        f = SymTensorField.zeros(grid)
        d = Direction.axis(3)
        B = perp_basis(d)
        assert slice_residual(f, d, 1.3 * B[0]) == 0.0

    def test_residual_second_order(self):
        errs = []
        for npts in (25, 49):
            f, _, _ = gaussian_field(npts=npts, width=0.25)
            d = Direction.axis(3)
            B = perp_basis(d)
            slab = transform_slab(f, d)
            rng = np.random.default_rng(6)
            rs = []
            for _ in range(6):
                zeta = rng.uniform(-1.5, 1.5, size=3) @ B
                rs.append(slice_residual(f, d, zeta, slab=slab))
            errs.append(np.mean(rs))
        assert 2.0 < errs[0] / errs[1] < 8.0
