import numpy as np
import pytest

from fusioncurve.admm import incidence_matrix
from fusioncurve.basis import SplineConfig, build_basis
from fusioncurve.errors import ConfigurationError
from fusioncurve.initialization import (
    default_tau1_grid,
    initialize,
    kmeans_init,
    ridge_coefficients_gcv,
)
from fusioncurve.metrics import adjusted_rand_index
from fusioncurve.model import Curve, LongitudinalDataset


@pytest.fixture
def basis():
    return build_basis(SplineConfig(degree=3, num_interior_knots=2))


def make_dataset(n=5, m=12, seed=0):
    rng = np.random.default_rng(seed)
    times = np.linspace(0.05, 0.95, m)
    return LongitudinalDataset(curves=[
        Curve(f"c{i}", times.copy(),
              np.sin(2 * np.pi * times) + 0.1 * rng.normal(size=m))
        for i in range(n)])


class TestRidgeGCV:
    def test_zero_penalty_is_ols(self, basis):
        data = make_dataset(n=3, m=15, seed=1)
        beta, tau1 = ridge_coefficients_gcv(data, basis, tau1_grid=[0.0])
        assert tau1 == 0.0
        designs = data.design_matrices(basis)
        for i, c in enumerate(data.curves):
            ols = np.linalg.lstsq(designs[i], c.values, rcond=None)[0]
            assert np.abs(beta[i] - ols).max() < 1e-8

    def test_gcv_literal_recomputation(self, basis):
        # Recompute the GCV score for each grid point from scratch and
        # check that the returned tau1 is its argmin.
        data = make_dataset(n=4, m=10, seed=2)
        grid = np.logspace(-4, 1, 7)
        _, tau1 = ridge_coefficients_gcv(data, basis, tau1_grid=grid)
        designs = data.design_matrices(basis)
        q = basis.dimension
        scores = []
        for t in grid:
            total = 0.0
            for i, c in enumerate(data.curves):
                B = designs[i]
                H = B @ np.linalg.inv(B.T @ B + t * np.eye(q)) @ B.T
                r = (np.eye(c.times.size) - H) @ c.values
                total += c.times.size * (r @ r) / np.trace(
                    np.eye(c.times.size) - H) ** 2
            scores.append(total)
        assert tau1 == pytest.approx(grid[int(np.argmin(scores))])

    def test_large_penalty_shrinks_coefficients(self, basis):
        data = make_dataset(n=2, m=10, seed=3)
        small, _ = ridge_coefficients_gcv(data, basis, tau1_grid=[1e-8])
        big, _ = ridge_coefficients_gcv(data, basis, tau1_grid=[1e8])
        assert np.linalg.norm(big) < 1e-4 * np.linalg.norm(small)

    def test_invalid_grid(self, basis):
        data = make_dataset()
        with pytest.raises(ConfigurationError):
            ridge_coefficients_gcv(data, basis, tau1_grid=[])
        with pytest.raises(ConfigurationError):
            ridge_coefficients_gcv(data, basis, tau1_grid=[-1.0])

    def test_default_grid_shape(self):
        g = default_tau1_grid()
        assert g.size == 20 and g[0] == pytest.approx(1e-6)
        assert g[-1] == pytest.approx(1e2)


class TestKMeansInit:
    def test_separated_blobs_recovered(self):
        rng = np.random.default_rng(0)
        centers = np.array([[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]])
        truth = np.repeat([1, 2, 3], 20)
        X = centers[truth - 1] + 0.1 * rng.normal(size=(60, 2))
        labels = kmeans_init(X, k0=3, seed=0)
        ari = adjusted_rand_index({i: truth[i] for i in range(60)},
                                  {i: labels[i] for i in range(60)})
        assert ari == pytest.approx(1.0)

    def test_k0_edge_cases(self):
        X = np.arange(8.0).reshape(4, 2)
        assert np.array_equal(kmeans_init(X, 1, 0), np.ones(4, dtype=int))
        assert np.array_equal(kmeans_init(X, 4, 0), [1, 2, 3, 4])
        with pytest.raises(ConfigurationError):
            kmeans_init(X, 0, 0)
        with pytest.raises(ConfigurationError):
            kmeans_init(X, 5, 0)

    def test_labels_contiguous_from_one(self):
        rng = np.random.default_rng(1)
        X = rng.normal(size=(30, 3))
        labels = kmeans_init(X, 6, seed=1)
        assert set(np.unique(labels)) <= set(range(1, 7))
        assert labels.min() == 1

    def test_deterministic_given_seed(self):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(40, 4))
        a = kmeans_init(X, 5, seed=7)
        b = kmeans_init(X, 5, seed=7)
        assert np.array_equal(a, b)


class TestInitialize:
    def test_state_consistency(self, basis):
        data = make_dataset(n=6, m=12, seed=4)
        params, state = initialize(data, basis, P=1, k0=3, seed=0)
        params.validate()
        D = incidence_matrix(data.n)
        assert np.abs(state.delta - D @ params.beta).max() < 1e-12
        assert np.all(state.duals == 0.0)
        assert state.weights.shape == (data.n * (data.n - 1) // 2,)

    def test_weights_passed_through(self, basis):
        data = make_dataset(n=4, m=12, seed=5)
        W = np.arange(16.0).reshape(4, 4)
        _, state = initialize(data, basis, P=1, k0=2, seed=0, weights=W)
        expected = [W[0, 1], W[0, 2], W[0, 3], W[1, 2], W[1, 3], W[2, 3]]
        assert np.array_equal(state.weights, expected)

    def test_deterministic(self, basis):
        data = make_dataset(n=6, m=12, seed=6)
        p1, s1 = initialize(data, basis, P=2, k0=3, seed=11)
        p2, s2 = initialize(data, basis, P=2, k0=3, seed=11)
        assert np.array_equal(p1.beta, p2.beta)
        assert np.array_equal(p1.theta, p2.theta)
        assert np.array_equal(s1.delta, s2.delta)

    def test_p0_has_no_theta(self, basis):
        data = make_dataset(n=4, m=12, seed=7)
        params, _ = initialize(data, basis, P=0, k0=2, seed=0)
        assert params.theta is None and params.lam is None
        assert params.sigma2 > 0
