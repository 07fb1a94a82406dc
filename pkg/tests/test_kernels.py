import numpy as np
import pytest

from minkray import kernels


@pytest.fixture
def rng():
    return np.random.default_rng(42)


def brute_interp(values, point):
    """Corner-sum multilinear interpolation oracle, zero outside the grid."""
    base = np.floor(point).astype(int)
    frac = point - base
    total = 0.0
    for corner in range(1 << values.ndim):
        idx = []
        w = 1.0
        ok = True
        for ax in range(values.ndim):
            d = (corner >> ax) & 1
            j = base[ax] + d
            w *= frac[ax] if d else (1.0 - frac[ax])
            if not 0 <= j < values.shape[ax]:
                ok = False
                break
            idx.append(j)
        if ok and w != 0.0:
            total += w * values[tuple(idx)]
    return total


@pytest.mark.parametrize("backend", ["python"] + (["cython"] if kernels.HAVE_EXT else []))
def test_interpolation_against_corner_sum(rng, backend):
    g = rng.standard_normal((6, 7, 6, 8))
    pts = rng.uniform(-2.0, 9.0, size=(300, 4))
    got = kernels.interpolate(g, pts, backend=backend)
    expect = np.array([brute_interp(g, p) for p in pts])
    assert np.abs(got - expect).max() < 1e-12


@pytest.mark.skipif(not kernels.HAVE_EXT, reason="compiled kernels not built")
def test_backends_agree_on_ray_sums(rng):
    g = rng.standard_normal((9, 9, 9, 9))
    starts = rng.uniform(-2, 10, size=(200, 4))
    step = np.array([0.3, 0.2, -0.1, 0.25])
    a = kernels.ray_sums(g, starts, step, 40, 0.05, backend="cython")
    b = kernels.ray_sums(g, starts, step, 40, 0.05, backend="python")
    assert np.abs(a - b).max() < 1e-12


def test_ray_sums_trapezoid_weights(rng):
    # ray along a grid axis on a constant field: plain trapezoid of 1's
    g = np.ones((8, 8, 8, 8))
    starts = np.array([[3.0, 3.0, 3.0, 1.0]])
    step = np.array([0.0, 0.0, 0.0, 0.5])
    nsteps = 8
    got = kernels.ray_sums(g, starts, step, nsteps, 0.25)
    assert np.isclose(got[0], 0.25 * nsteps)


def test_ray_fully_outside_is_zero(rng):
    g = rng.standard_normal((8, 8, 8, 8))
    starts = np.array([[-50.0, 0.0, 0.0, 0.0]])
    step = np.array([0.1, 0.0, 0.0, 0.0])
    assert kernels.ray_sums(g, starts, step, 20, 0.1)[0] == 0.0


def test_nd_fallback_works_in_5d(rng):
    g = rng.standard_normal((5, 5, 5, 5, 5))
    starts = rng.uniform(0, 4, size=(10, 5))
    step = np.full(5, 0.2)
    vals = kernels.ray_sums(g, starts, step, 10, 0.1)
    assert vals.shape == (10,)
    assert np.all(np.isfinite(vals))
