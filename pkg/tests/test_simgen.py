import numpy as np
import pytest

from fusioncurve.errors import ConfigurationError
from fusioncurve.simgen import (
    EIGENFUNCTIONS,
    MEAN_SETS,
    ScenarioSpec,
    generate,
    scenario2_lattice,
)
from fusioncurve.weights import neighbor_order


def test_time_grid_is_interior():
    data, _ = generate(ScenarioSpec(scenario=1, m=10, seed=0))
    expected = np.arange(1, 11) / 11.0
    for c in data.curves:
        assert np.allclose(c.times, expected)


def test_scenario1_sizes_and_partition():
    data, truth = generate(ScenarioSpec(scenario=1, seed=1))
    assert data.n == 150
    labels = np.array([truth.partition[c.id] for c in data.curves])
    assert np.array_equal(np.bincount(labels)[1:], [50, 50, 50])
    assert data.coordinates is None


def test_noiseless_recovers_means_exactly():
    spec = ScenarioSpec(scenario=1, m=15, sigma=0.0, lam=(), seed=2,
                        group_sizes=(3, 3, 3))
    data, truth = generate(spec)
    for c in data.curves:
        mu = MEAN_SETS["A"][truth.partition[c.id] - 1](c.times)
        assert np.array_equal(c.values, mu)
        assert np.array_equal(truth.mean_values[c.id], mu)


def test_variance_decomposition_monte_carlo():
    # Var Y(t) = 2 * (0.1 sin^2(2 pi t) + 0.2 cos^2(2 pi t)) + sigma^2,
    # checked within 3 standard errors on a large single-group sample.
    m = 8
    spec = ScenarioSpec(scenario="custom", m=m, sigma=0.2, seed=3,
                        group_sizes=(10000,))
    data, truth = generate(spec)
    Y = np.stack([c.values for c in data.curves])
    times = data.curves[0].times
    mu = MEAN_SETS["A"][0](times)
    sample_var = np.var(Y - mu, axis=0, ddof=1)
    theory = (2 * (0.1 * np.sin(2 * np.pi * times) ** 2
                   + 0.2 * np.cos(2 * np.pi * times) ** 2) + 0.04)
    # SE of a sample variance for Gaussian data: sqrt(2/(n-1)) * var.
    se = np.sqrt(2.0 / (Y.shape[0] - 1)) * theory
    assert np.all(np.abs(sample_var - theory) < 3 * se)


def test_eigenfunctions_orthonormal_l2():
    t = np.linspace(0, 1, 200001)
    psi1 = EIGENFUNCTIONS[0](t)
    psi2 = EIGENFUNCTIONS[1](t)
    assert np.trapezoid(psi1 * psi1, t) == pytest.approx(1.0, abs=1e-6)
    assert np.trapezoid(psi2 * psi2, t) == pytest.approx(1.0, abs=1e-6)
    assert np.trapezoid(psi1 * psi2, t) == pytest.approx(0.0, abs=1e-6)


def test_lattice_structure():
    coords, labels = scenario2_lattice()
    assert coords.shape == (144, 2)
    assert np.array_equal(np.bincount(labels)[1:], [48, 48, 48])
    # Each band is internally rook-connected.
    for g in (1, 2, 3):
        sub = coords[labels == g]
        dist = neighbor_order(sub, "rook")
        assert np.isfinite(dist).all()
    # Whole lattice diameter under rook moves is 11 + 11 = 22.
    assert neighbor_order(coords, "rook").max() == 22


def test_scenario2_attaches_coordinates():
    data, truth = generate(ScenarioSpec(scenario=2, seed=4))
    assert data.n == 144
    assert data.coordinates is not None
    coords, labels = scenario2_lattice()
    for i, c in enumerate(data.curves):
        assert data.coordinates[c.id] == tuple(coords[i])
        assert truth.partition[c.id] == labels[i]


def test_scenario3_uses_close_means():
    data, truth = generate(ScenarioSpec(scenario=3, m=12, sigma=0.0, lam=(),
                                        seed=5))
    times = data.curves[0].times
    g1 = next(c for c in data.curves if truth.partition[c.id] == 1)
    g2 = next(c for c in data.curves if truth.partition[c.id] == 2)
    assert np.allclose(g1.values, np.sin(4 * np.pi * times) + 1.0)
    assert np.allclose(g2.values, np.sin(4 * np.pi * times) + 0.3)


def test_byte_reproducibility():
    a, ta = generate(ScenarioSpec(scenario=2, seed=9))
    b, tb = generate(ScenarioSpec(scenario=2, seed=9))
    for ca, cb in zip(a.curves, b.curves):
        assert ca.id == cb.id
        assert np.array_equal(ca.values, cb.values)
    assert ta.partition == tb.partition
    c, _ = generate(ScenarioSpec(scenario=2, seed=10))
    assert not np.array_equal(a.curves[0].values, c.curves[0].values)


def test_invalid_specs():
    with pytest.raises(ConfigurationError):
        ScenarioSpec(scenario=7)
    with pytest.raises(ConfigurationError):
        ScenarioSpec(m=0)
    with pytest.raises(ConfigurationError):
        ScenarioSpec(sigma=-1.0)
    with pytest.raises(ConfigurationError):
        generate(ScenarioSpec(scenario="custom", group_sizes=(5, 5, 5, 5)))
