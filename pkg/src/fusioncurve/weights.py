"""Pairwise penalty weights: equal, spatial-lattice, or index-distance."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import shortest_path

from .errors import ConfigurationError, DataError
from .model import LongitudinalDataset

__all__ = ["WeightConfig", "neighbor_order", "build_weights"]

SCHEMES = ("equal", "lattice", "index")


@dataclass(frozen=True)
class WeightConfig:
    """Weight scheme and its decay constant.

    ``adjacency`` selects how lattice neighbor order is measured: rook
    (4-neighbor, the default) or queen (8-neighbor).
    """

    scheme: str = "equal"
    alpha: float = 0.0
    adjacency: str = "rook"

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ConfigurationError(f"unknown weight scheme {self.scheme!r}")
        if not np.isfinite(self.alpha) or self.alpha < 0:
            raise ConfigurationError(f"alpha must be finite and >= 0, got {self.alpha}")
        if self.adjacency not in ("rook", "queen"):
            raise ConfigurationError(f"unknown adjacency {self.adjacency!r}")


def neighbor_order(coords: np.ndarray, adjacency: str = "rook") -> np.ndarray:
    """Pairwise neighbor order between lattice sites.

    Defined as graph distance in the site adjacency graph; adjacent
    sites have order 1.  Under rook adjacency on integer grid points
    this is the Manhattan distance.
    """
    coords = np.asarray(coords, dtype=int)
    n = coords.shape[0]
    if len({tuple(c) for c in coords}) != n:
        raise DataError("duplicate lattice coordinates")
    dr = np.abs(coords[:, None, 0] - coords[None, :, 0])
    dc = np.abs(coords[:, None, 1] - coords[None, :, 1])
    if adjacency == "rook":
        adj = (dr + dc) == 1
    else:
        adj = np.maximum(dr, dc) == 1
    dist = shortest_path(sp.csr_matrix(adj.astype(float)), unweighted=True)
    if np.isinf(dist).any():
        raise DataError("lattice is disconnected under the chosen adjacency")
    return dist.astype(int)


def build_weights(config: WeightConfig,
                  dataset: LongitudinalDataset) -> np.ndarray:
    """Symmetric positive weight matrix c, shape (n, n).

    Equal weights are all ones; lattice and index weights decay
    exponentially in neighbor order / index distance.  The diagonal is
    set to 1 and never read by the penalty.
    """
    n = dataset.n
    if config.scheme == "equal":
        return np.ones((n, n))
    if config.scheme == "lattice":
        if dataset.coordinates is None:
            raise DataError("lattice weights need site coordinates")
        try:
            coords = np.array([dataset.coordinates[i] for i in dataset.ids])
        except KeyError as exc:
            raise DataError(f"missing coordinates for curve {exc.args[0]!r}") from exc
        a = neighbor_order(coords, config.adjacency)
    else:
        if dataset.indices is None:
            raise DataError("index weights need a numeric index per curve")
        try:
            idx = np.array([dataset.indices[i] for i in dataset.ids], dtype=float)
        except KeyError as exc:
            raise DataError(f"missing index for curve {exc.args[0]!r}") from exc
        a = np.abs(idx[:, None] - idx[None, :])
    c = np.exp(config.alpha * (1.0 - a))
    np.fill_diagonal(c, 1.0)
    return c
