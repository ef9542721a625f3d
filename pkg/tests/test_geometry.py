import numpy as np
import pytest
from scipy import integrate, stats

from graphpde.errors import ContractViolationError
from graphpde.geometry import (
    DensitySpec,
    sample_density,
    torus_displacement,
    torus_distance,
    wrap,
)


def test_wrap_examples():
    np.testing.assert_allclose(wrap([1.25, -0.5]), [0.25, 0.5])
    np.testing.assert_allclose(wrap([0.0, 0.999]), [0.0, 0.999])
    np.testing.assert_allclose(wrap([3.0]), [0.0])


def test_wrap_rejects_nonfinite():
    with pytest.raises(ValueError):
        wrap([np.nan, 0.0])
    with pytest.raises(ValueError):
        wrap([np.inf])


def test_wrap_idempotent_and_range():
    rng = np.random.default_rng(3)
    v = rng.normal(scale=5.0, size=(1000, 3))
    w1 = wrap(v)
    assert np.all((w1 >= 0.0) & (w1 < 1.0))
    np.testing.assert_array_equal(wrap(w1), w1)


def test_displacement_examples():
    np.testing.assert_allclose(torus_displacement([0.9], [0.1]), [0.2])
    np.testing.assert_allclose(torus_displacement([0.3, 0.3], [0.3, 0.3]), [0.0, 0.0])
    np.testing.assert_allclose(torus_displacement([0.0], [0.6]), [-0.4])


def test_displacement_range_and_antisymmetry():
    rng = np.random.default_rng(11)
    x = rng.random((2000, 2))
    y = rng.random((2000, 2))
    d = torus_displacement(x, y)
    assert np.all((d >= -0.5) & (d < 0.5))
    # exact antisymmetry away from the half-open boundary
    np.testing.assert_array_equal(d, -torus_displacement(y, x))
    assert np.all(torus_distance(x, y) <= np.sqrt(2.0) / 2.0 + 1e-15)


def test_displacement_dimension_mismatch():
    with pytest.raises(ValueError):
        torus_displacement([0.1, 0.2], [0.1])


def test_sample_uniform_accepts_everything():
    spec = DensitySpec.uniform(2)
    pts = sample_density(spec, 5, seed=7)
    assert pts.shape == (5, 2)
    # acceptance probability one: the first 5 proposals of the stream are kept
    rng = np.random.default_rng(np.random.SeedSequence(7))
    proposals = rng.random((256, 2))  # minimum batch size
    np.testing.assert_array_equal(pts, proposals[:5])


def test_sample_rejects_n_zero():
    with pytest.raises(ValueError):
        sample_density(DensitySpec.uniform(1), 0, seed=1)


def test_sample_reproducible():
    spec = DensitySpec.cosine_bump(2)
    a = sample_density(spec, 300, seed=42)
    b = sample_density(spec, 300, seed=42)
    np.testing.assert_array_equal(a, b)
    c = sample_density(spec, 300, seed=43)
    assert not np.array_equal(a, c)


def test_sample_cosine_chi_square():
    # oracle: bin masses of rho(x) = 1 + 0.5 cos(2 pi x) from quadrature
    spec = DensitySpec.cosine_bump(1)
    n = 100_000
    pts = sample_density(spec, n, seed=2024)[:, 0]
    bins = 16
    edges = np.linspace(0.0, 1.0, bins + 1)
    expected = np.array([
        integrate.quad(lambda t: 1.0 + 0.5 * np.cos(2.0 * np.pi * t),
                       edges[i], edges[i + 1])[0]
        for i in range(bins)
    ])
    observed = np.histogram(pts, bins=edges)[0]
    chi2 = np.sum((observed - n * expected) ** 2 / (n * expected))
    assert chi2 < stats.chi2.ppf(0.99, bins - 1)


def test_density_contract_violation():
    lying = DensitySpec(lambda x: np.ones(np.atleast_2d(x).shape[0]), 1,
                        rho_min=0.5, rho_max=1.0, name="edge")
    lying.rho = lambda x: 2.0 * np.ones(np.atleast_2d(x).shape[0])
    with pytest.raises(ContractViolationError):
        sample_density(lying, 10, seed=0)


def test_density_bounds_spot_checked():
    with pytest.raises(ValueError):
        DensitySpec(lambda x: np.full(np.atleast_2d(x).shape[0], 2.0), 1,
                    rho_min=0.5, rho_max=1.0)
    with pytest.raises(ValueError):
        DensitySpec(lambda x: np.ones(np.atleast_2d(x).shape[0]), 1,
                    rho_min=0.0, rho_max=1.0)
