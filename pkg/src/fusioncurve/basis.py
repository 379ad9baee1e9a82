"""Orthonormal B-spline bases on a compact interval.

The raw clamped B-spline basis is orthonormalized through a linear
transform built from the exact Gram matrix, so that the transformed
basis functions satisfy int B(t) B(t)^T dt = I.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.interpolate import BSpline

from .errors import ConfigurationError, DomainError

__all__ = ["SplineConfig", "OrthoSplineBasis", "build_basis", "gram_raw"]


@dataclass(frozen=True)
class SplineConfig:
    """Layout of a clamped B-spline basis with equally spaced interior knots."""

    degree: int = 3
    num_interior_knots: int = 0
    interval: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        if self.degree < 0:
            raise ConfigurationError(f"degree must be >= 0, got {self.degree}")
        if self.num_interior_knots < 0:
            raise ConfigurationError(
                f"num_interior_knots must be >= 0, got {self.num_interior_knots}"
            )
        a, b = self.interval
        if not np.isfinite(a) or not np.isfinite(b) or not a < b:
            raise ConfigurationError(f"degenerate interval {self.interval}")

    @property
    def dimension(self) -> int:
        """Number of basis functions q."""
        return self.num_interior_knots + self.degree + 1

    def knot_vector(self) -> np.ndarray:
        """Clamped knot vector with boundary multiplicity degree + 1."""
        a, b = self.interval
        interior = np.linspace(a, b, self.num_interior_knots + 2)[1:-1]
        return np.concatenate(
            [np.full(self.degree + 1, a), interior, np.full(self.degree + 1, b)]
        )


@dataclass(frozen=True)
class OrthoSplineBasis:
    """Orthonormalized B-spline basis.

    ``transform`` maps raw basis evaluations to orthonormal ones:
    row h of :meth:`eval` is ``transform.T @ B_raw(t_h)``.  Immutable,
    safe to share across threads/processes.
    """

    config: SplineConfig
    knot_vector: np.ndarray = field(repr=False)
    transform: np.ndarray = field(repr=False)

    @property
    def dimension(self) -> int:
        return self.config.dimension

    def eval_raw(self, times) -> np.ndarray:
        """Raw (non-orthonormal) basis evaluations, shape (len(times), q)."""
        times = np.atleast_1d(np.asarray(times, dtype=float))
        a, b = self.config.interval
        if times.size and (times.min() < a or times.max() > b):
            raise DomainError(
                f"evaluation times outside basis interval [{a}, {b}]"
            )
        return BSpline.design_matrix(
            times, self.knot_vector, self.config.degree
        ).toarray()

    def eval(self, times) -> np.ndarray:
        """Orthonormal basis evaluations, shape (len(times), q)."""
        return self.eval_raw(times) @ self.transform


def _span_quadrature(config: SplineConfig):
    """Gauss-Legendre nodes/weights on each interior knot span.

    The node count is exact for polynomials of degree 2*degree, which
    covers products of two basis functions on a single span.
    """
    a, b = config.interval
    breaks = np.linspace(a, b, config.num_interior_knots + 2)
    n_nodes = int(np.ceil((2 * config.degree + 1) / 2)) + 1
    x, w = leggauss(n_nodes)
    lo, hi = breaks[:-1], breaks[1:]
    half = (hi - lo) / 2.0
    nodes = (x[None, :] * half[:, None] + (lo + hi)[:, None] / 2.0).ravel()
    weights = (w[None, :] * half[:, None]).ravel()
    return nodes, weights


def gram_raw(config: SplineConfig) -> np.ndarray:
    """Exact Gram matrix of the raw B-spline basis.

    Computed by per-span Gauss-Legendre quadrature, exact for the
    piecewise-polynomial integrand.  Symmetric positive definite.
    """
    nodes, weights = _span_quadrature(config)
    B = BSpline.design_matrix(nodes, config.knot_vector(), config.degree).toarray()
    G = (B * weights[:, None]).T @ B
    return (G + G.T) / 2.0


def build_basis(config: SplineConfig) -> OrthoSplineBasis:
    """Build an orthonormalized basis from ``config``.

    The transform is the symmetric inverse square root of the raw Gram
    matrix, so the orthonormalized Gram is the identity and the result
    does not depend on basis ordering.
    """
    G = gram_raw(config)
    evals, evecs = np.linalg.eigh(G)
    if evals.min() <= 0:
        raise ConfigurationError("raw Gram matrix is not positive definite")
    transform = evecs @ np.diag(1.0 / np.sqrt(evals)) @ evecs.T
    return OrthoSplineBasis(
        config=config, knot_vector=config.knot_vector(), transform=transform
    )
