"""Starting values: per-curve ridge fits, k-means grouping, known-group EM."""

from __future__ import annotations

import numpy as np
from sklearn.cluster import KMeans

from .admm import FusionState, PenaltyConfig, incidence_matrix, pair_indices
from .basis import OrthoSplineBasis
from .em import known_group_em
from .errors import ConfigurationError, DataError
from .model import LongitudinalDataset, ModelParams

__all__ = ["default_tau1_grid", "ridge_coefficients_gcv", "kmeans_init",
           "initialize"]


def default_tau1_grid() -> np.ndarray:
    return np.logspace(-6, 2, 20)


def ridge_coefficients_gcv(data: LongitudinalDataset, basis: OrthoSplineBasis,
                           tau1_grid=None) -> tuple[np.ndarray, float]:
    """Per-curve ridge coefficients at the GCV-minimizing penalty.

    The roughness penalty matrix is the identity because the basis is
    orthonormal.  Returns (beta_star, tau1).
    """
    if tau1_grid is None:
        tau1_grid = default_tau1_grid()
    tau1_grid = np.asarray(tau1_grid, dtype=float)
    if tau1_grid.size == 0 or np.any(tau1_grid < 0):
        raise ConfigurationError("tau1 grid must be nonempty with values >= 0")
    if any(c.times.size < 1 for c in data.curves):
        raise DataError("every curve needs at least one observation")

    designs = data.design_matrices(basis)
    q = basis.dimension
    best = None
    for tau1 in tau1_grid:
        gcv = 0.0
        beta = np.empty((data.n, q))
        for i, c in enumerate(data.curves):
            B = designs[i]
            n_i = c.times.size
            M = B.T @ B + tau1 * np.eye(q)
            BtY = B.T @ c.values
            beta[i] = np.linalg.solve(M, BtY)
            H = B @ np.linalg.solve(M, B.T)
            IH = np.eye(n_i) - H
            denom = np.trace(IH) ** 2
            gcv += n_i * c.values @ IH @ IH @ c.values / denom
        if best is None or gcv < best[0]:
            best = (gcv, float(tau1), beta)
    return best[2], best[1]


def kmeans_init(beta_star: np.ndarray, k0: int, seed: int,
                restarts: int = 10) -> np.ndarray:
    """Cluster ridge coefficients; labels 1..k0 with every label used."""
    n = beta_star.shape[0]
    if not 1 <= k0 <= n:
        raise ConfigurationError(f"k0 must be in [1, {n}], got {k0}")
    if k0 == 1:
        return np.ones(n, dtype=int)
    if k0 == n:
        return np.arange(1, n + 1)
    km = KMeans(n_clusters=k0, n_init=restarts, random_state=seed)
    raw = km.fit_predict(beta_star)
    # Relabel so that labels are contiguous from 1 even if a cluster
    # came back empty.
    _, labels = np.unique(raw, return_inverse=True)
    return labels + 1


def initialize(data: LongitudinalDataset, basis: OrthoSplineBasis, P: int,
               k0: int, seed: int, penalty: PenaltyConfig | None = None,
               weights: np.ndarray | None = None,
               ) -> tuple[ModelParams, FusionState]:
    """Full initialization pipeline.

    Ridge + GCV for rough coefficients, k-means for a provisional
    partition, known-group EM for parameter starting values; the split
    variables start at the pairwise beta differences with zero duals.
    """
    beta_star, _ = ridge_coefficients_gcv(data, basis)
    labels = kmeans_init(beta_star, min(k0, data.n), seed)
    params = known_group_em(data, basis, labels - 1, P, beta_star)

    if penalty is None:
        penalty = PenaltyConfig(tau=0.0)
    ii, jj = pair_indices(data.n)
    if weights is None:
        w = np.ones(ii.size)
    else:
        w = np.asarray(weights)[ii, jj]
    D = incidence_matrix(data.n)
    delta0 = D @ params.beta
    state = FusionState(delta=delta0, duals=np.zeros_like(delta0),
                        penalty=penalty, weights=w)
    return params, state
