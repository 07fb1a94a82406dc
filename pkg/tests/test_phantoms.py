import numpy as np
import pytest

from minkray.grid_field import (
    Grid,
    component_index,
    divergence,
    num_components,
    trace,
    vector_divergence,
)
from minkray.phantoms import (
    GaussianSpec,
    SupportError,
    flat_top_window,
    phantom_gauge,
    phantom_gaussian,
    phantom_solenoidal,
    solenoidal_projector,
)


class TestPhantomGaussian:
    def test_zero_weights_zero_field(self):
        grid = Grid.box(3, 12)
        f = phantom_gaussian(grid, (0.0,) * 4, 0.15, np.zeros(10))
        assert np.all(f.components == 0.0)
        assert f.supported

    def test_value_at_center(self):
        grid = Grid.box(3, 17, -1.0, 1.0)  # odd count puts a point at 0
        w = np.zeros(10)
        w[0] = 1.0
        f = phantom_gaussian(grid, (0.0,) * 4, 0.15, w)
        center_idx = tuple(s // 2 for s in grid.shape)
        assert np.isclose(f.components[0][center_idx], 1.0)

    def test_integral_matches_closed_form(self):
        width = 0.25
        grid = Grid.box(3, 40, -1.6, 1.6)
        w = np.zeros(10)
        w[0] = 1.0
        f = phantom_gaussian(grid, (0.0,) * 4, width, w)
        got = f.components[0].sum() * grid.cell_volume
        expect = (np.sqrt(np.pi) * width) ** 4
        assert abs(got - expect) < 1e-6 * expect

    def test_width_too_large_raises(self):
        grid = Grid.box(3, 12, -1.0, 1.0)
        with pytest.raises(SupportError):
            phantom_gaussian(grid, (0.0,) * 4, 0.5, np.ones(10))

    def test_center_outside_rejected(self):
        grid = Grid.box(3, 12)
        with pytest.raises(ValueError, match="center"):
            phantom_gaussian(grid, (2.0, 0.0, 0.0, 0.0), 0.1, np.ones(10))


class TestPhantomGauge:
    def grid(self):
        return Grid.box(3, 16, -1.0, 1.0)

    def test_zero_specs_zero_field(self):
        zero = GaussianSpec(0.0, (0.0,) * 4, 0.2)
        f, lam, v = phantom_gauge(self.grid(), zero, [zero] * 4)
        assert np.all(f.components == 0.0)
        assert np.all(lam.values == 0.0)
        assert np.all(v.components == 0.0)

    def test_pure_lambda_is_diagonal_metric_multiple(self):
        g = self.grid()
        zero = GaussianSpec(0.0, (0.0,) * 4, 0.2)
        lam_spec = GaussianSpec(0.9, (0.0,) * 4, 0.15)
        f, lam, v = phantom_gauge(g, lam_spec, [zero] * 4)
        assert np.array_equal(f.component(0, 0), -lam.values)
        for i in range(1, 4):
            assert np.array_equal(f.component(i, i), lam.values)
        assert np.abs(f.component(0, 2)).max() == 0.0

    def test_trace_equation_residual(self):
        # trace F = (n-1) lambda + div v up to the stencil error on dv
        g = self.grid()
        lam_spec = GaussianSpec(0.6, (0.05, 0.0, 0.0, -0.05), 0.14)
        vspecs = [GaussianSpec(a, c, w) for a, c, w in [
            (0.5, (0.0, 0.1, 0.0, 0.0), 0.3),
            (-0.4, (0.1, 0.0, -0.1, 0.0), 0.35),
            (0.7, (0.0, 0.0, 0.1, 0.0), 0.32),
            (0.3, (0.0, -0.1, 0.0, 0.1), 0.3),
        ]]
        maxes = {}
        for npts in (16, 32):
            gg = Grid.box(3, npts, -1.0, 1.0)
            f, lam, v = phantom_gauge(gg, lam_spec, vspecs)
            resid = trace(f).values - (gg.n - 1) * lam.values - vector_divergence(v).values
            maxes[npts] = np.abs(resid).max()
        h = 2.0 / 15
        assert maxes[16] < 40.0 * h ** 2
        assert 3.0 < maxes[16] / maxes[32] < 5.5

    def test_v_vanishes_on_boundary(self):
        g = self.grid()
        zero = GaussianSpec(0.0, (0.0,) * 4, 0.2)
        spec = GaussianSpec(1.0, (0.0,) * 4, 0.4)
        _, _, v = phantom_gauge(g, zero, [spec] * 4)
        assert v.boundary_zero


class TestSolenoidalProjector:
    def test_idempotent(self):
        rng = np.random.default_rng(0)
        for n in (3, 4):
            sigma = rng.standard_normal(n + 1)
            P = solenoidal_projector(sigma, n)
            assert np.abs(P @ P - P).max() < 1e-12

    def test_zero_frequency_keeps_divergence_freedom(self):
        # at sigma = 0 only the trace condition remains active
        n = 3
        P = solenoidal_projector(np.zeros(n + 1), n)
        rng = np.random.default_rng(1)
        x = rng.standard_normal(num_components(n))
        y = P @ x
        diag = [component_index(i, i, n) for i in range(n + 1)]
        assert abs(y[diag].sum()) < 1e-12
        off = [k for k in range(num_components(n)) if k not in diag]
        assert np.allclose(y[off], x[off])

    def test_projected_spectrum_annihilated_by_constraints(self):
        from minkray.freq_solver import constraint_rows
        rng = np.random.default_rng(2)
        for n in (3, 4):
            zeta = rng.standard_normal(n + 1)
            P = solenoidal_projector(zeta, n)
            x = rng.standard_normal(num_components(n)) + 1j * rng.standard_normal(num_components(n))
            y = P @ x
            assert np.abs(constraint_rows(zeta) @ y).max() < 1e-10


@pytest.fixture(scope="module")
def built():
    grid = Grid.box(3, 24, -1.0, 1.0)
    return phantom_solenoidal(grid, band_limit=10.0, seed=11)


class TestPhantomSolenoidal:

    def test_pre_window_constraints_tiny(self, built):
        f, report = built
        assert report["pre_window_div"] < 1e-8 * report["scale"]
        assert report["pre_window_trace"] < 1e-10 * report["scale"]

    def test_trace_survives_windowing(self, built):
        f, report = built
        assert np.abs(trace(f).values).max() < 1e-10 * report["scale"]

    def test_supported_and_windowing_residual_reported(self, built):
        f, report = built
        assert f.supported
        assert report["post_window_div"] > 0.0
        sl = (slice(None),) + (slice(1, -1),) * 4
        recomputed = np.abs(divergence(f).components[sl]).max()
        assert np.isclose(recomputed, report["post_window_div"])

    def test_band_limit_above_nyquist_rejected(self):
        grid = Grid.box(3, 12, -1.0, 1.0)
        with pytest.raises(ValueError, match="Nyquist"):
            phantom_solenoidal(grid, band_limit=100.0, seed=0)

    def test_deterministic_for_fixed_seed(self):
        grid = Grid.box(3, 12, -1.0, 1.0)
        f1, _ = phantom_solenoidal(grid, band_limit=8.0, seed=4)
        f2, _ = phantom_solenoidal(grid, band_limit=8.0, seed=4)
        assert np.array_equal(f1.components, f2.components)


class TestFlatTopWindow:
    def test_one_in_bulk_zero_on_faces(self):
        grid = Grid.box(3, 20, -1.0, 1.0)
        w = flat_top_window(grid, collar=0.2)
        assert np.isclose(w[10, 10, 10, 10], 1.0)
        assert w[0, 5, 5, 5] == 0.0
        assert w[5, 5, 5, -1] == 0.0
