"""Core data model: longitudinal curves, model parameters, fit results."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .basis import OrthoSplineBasis
from .errors import DataError, NumericError

__all__ = [
    "Curve",
    "LongitudinalDataset",
    "ModelParams",
    "ConditionalMoments",
    "FitResult",
    "mean_curve",
    "covariance_surface",
    "conditional_negative_loglikelihood",
    "marginal_negative_loglikelihood",
]

LAMBDA_FLOOR = 1e-10
SIGMA2_FLOOR = 1e-12


@dataclass(frozen=True)
class Curve:
    """One observed curve: id, time points in [0, 1] and observations."""

    id: str
    times: np.ndarray
    values: np.ndarray


@dataclass
class LongitudinalDataset:
    """A collection of longitudinal curves.

    ``coordinates`` (integer lattice sites) and ``indices`` (numeric
    positions such as ages) are optional per-id side information used
    only for building pairwise penalty weights.
    """

    curves: list[Curve]
    coordinates: dict[str, tuple[int, int]] | None = None
    indices: dict[str, float] | None = None
    _design_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if len(self.curves) < 2:
            raise DataError("need at least 2 curves")
        seen = set()
        for c in self.curves:
            t = np.asarray(c.times, dtype=float)
            y = np.asarray(c.values, dtype=float)
            if t.ndim != 1 or y.ndim != 1 or t.size != y.size or t.size < 1:
                raise DataError(f"curve {c.id!r}: times/values shape mismatch")
            if t.size > 1 and np.any(np.diff(t) <= 0):
                raise DataError(f"curve {c.id!r}: times not strictly increasing")
            if c.id in seen:
                raise DataError(f"duplicate curve id {c.id!r}")
            seen.add(c.id)
            object.__setattr__(c, "times", t)
            object.__setattr__(c, "values", y)

    @property
    def n(self) -> int:
        return len(self.curves)

    @property
    def ids(self) -> list[str]:
        return [c.id for c in self.curves]

    @property
    def n_obs(self) -> np.ndarray:
        return np.array([c.times.size for c in self.curves])

    def curve(self, id: str) -> Curve:
        for c in self.curves:
            if c.id == id:
                return c
        raise DataError(f"unknown curve id {id!r}")

    def shared_grid(self) -> np.ndarray | None:
        """Common time grid if all curves share one, else None."""
        if "shared_grid" not in self._design_cache:
            t0 = self.curves[0].times
            for c in self.curves[1:]:
                if c.times.size != t0.size or not np.array_equal(c.times, t0):
                    t0 = None
                    break
            self._design_cache["shared_grid"] = t0
        return self._design_cache["shared_grid"]

    def value_matrix(self) -> np.ndarray:
        """Observations stacked as an (n, m) matrix; shared grids only."""
        if self.shared_grid() is None:
            raise DataError("value_matrix requires a shared time grid")
        if "values" not in self._design_cache:
            self._design_cache["values"] = np.stack(
                [c.values for c in self.curves])
        return self._design_cache["values"]

    def design_matrices(self, basis: OrthoSplineBasis) -> list[np.ndarray]:
        """Per-curve basis evaluation matrices B_i (n_i x q).

        When all curves share a time grid the same array object is
        reused for every curve.  Results are memoized per basis.
        """
        key = id(basis)
        if key not in self._design_cache:
            shared = self.shared_grid()
            if shared is not None:
                B = basis.eval(shared)
                designs = [B] * self.n
            else:
                designs = [basis.eval(c.times) for c in self.curves]
            self._design_cache[key] = designs
        return self._design_cache[key]


@dataclass
class ModelParams:
    """Parameters of the reduced-rank model.

    ``beta`` holds per-curve mean coefficients (n x q).  ``theta``
    (q x P, orthonormal columns) and ``lam`` (nonincreasing positive)
    parameterize the low-rank covariance; both are None in the P = 0
    degenerate mode where only ``sigma2`` remains.
    """

    beta: np.ndarray
    theta: np.ndarray | None
    lam: np.ndarray | None
    sigma2: float

    @property
    def n_components(self) -> int:
        return 0 if self.theta is None else self.theta.shape[1]

    def validate(self, atol: float = 1e-8) -> None:
        """Raise NumericError if the identifiability invariants fail."""
        if self.sigma2 <= 0:
            raise NumericError(f"sigma2 must be positive, got {self.sigma2}")
        if self.theta is None:
            return
        P = self.theta.shape[1]
        gram = self.theta.T @ self.theta
        if np.abs(gram - np.eye(P)).max() > atol:
            raise NumericError("theta columns are not orthonormal")
        if np.any(self.lam <= 0) or np.any(np.diff(self.lam) > 0):
            raise NumericError("lambda must be positive and nonincreasing")
        for j in range(P):
            col = self.theta[:, j]
            lead = col[np.argmax(np.abs(col))]
            if lead < 0:
                raise NumericError(f"sign rule violated in theta column {j}")


@dataclass
class ConditionalMoments:
    """Posterior moments of the per-curve scores given the data.

    ``m`` is n x P; ``V`` holds one P x P covariance per curve (the
    same array object is shared when all curves have the same design).
    """

    m: np.ndarray
    V: list[np.ndarray]


@dataclass
class FitResult:
    """Converged parameters, extracted partition and diagnostics."""

    params: ModelParams
    partition: dict[str, int]
    k_hat: int
    objective_trace: list[float]
    bic: float
    tuning: dict
    iterations: int
    converged: bool
    diagnostics: dict = field(default_factory=dict)


def mean_curve(params: ModelParams, basis: OrthoSplineBasis,
               data: LongitudinalDataset, id: str, times) -> np.ndarray:
    """Fitted mean curve of one subject evaluated at ``times``."""
    i = data.ids.index(id) if id in data.ids else -1
    if i < 0:
        raise DataError(f"unknown curve id {id!r}")
    return basis.eval(times) @ params.beta[i]


def covariance_surface(params: ModelParams, basis: OrthoSplineBasis,
                       s_grid, t_grid) -> np.ndarray:
    """Low-rank covariance surface on the grid outer product.

    Returns a len(s_grid) x len(t_grid) matrix; zero in P = 0 mode.
    """
    Bs = basis.eval(s_grid)
    Bt = basis.eval(t_grid)
    if params.theta is None:
        return np.zeros((Bs.shape[0], Bt.shape[0]))
    core = params.theta @ np.diag(params.lam) @ params.theta.T
    return Bs @ core @ Bt.T


def conditional_negative_loglikelihood(
        params: ModelParams, data: LongitudinalDataset,
        basis: OrthoSplineBasis, scores: np.ndarray | None = None) -> float:
    """Joint negative log-likelihood with scores plugged in.

    ``scores`` defaults to zeros (their prior mean); the additive
    constant (n_i/2) log(2 pi) terms are omitted, matching the paper's
    loss form.
    """
    designs = data.design_matrices(basis)
    P = params.n_components
    if scores is None:
        scores = np.zeros((data.n, P))
    total = 0.0
    for i, c in enumerate(data.curves):
        resid = c.values - designs[i] @ params.beta[i]
        if P:
            resid = resid - designs[i] @ params.theta @ scores[i]
        total += 0.5 * c.times.size * np.log(params.sigma2)
        total += resid @ resid / (2.0 * params.sigma2)
    if P:
        total += 0.5 * data.n * np.sum(np.log(params.lam))
        total += 0.5 * np.sum(scores ** 2 / params.lam)
    return float(total)


def marginal_negative_loglikelihood(
        params: ModelParams, data: LongitudinalDataset,
        basis: OrthoSplineBasis) -> float:
    """Exact Gaussian marginal negative log-likelihood (scores integrated out).

    Used for diagnostics traces only; includes the 2 pi constants.
    """
    designs = data.design_matrices(basis)
    total = 0.0
    for i, c in enumerate(data.curves):
        B = designs[i]
        n_i = c.times.size
        cov = params.sigma2 * np.eye(n_i)
        if params.n_components:
            F = B @ params.theta
            cov = cov + F @ np.diag(params.lam) @ F.T
        resid = c.values - B @ params.beta[i]
        sign, logdet = np.linalg.slogdet(cov)
        if sign <= 0:
            raise NumericError("marginal covariance is not positive definite")
        total += 0.5 * (n_i * np.log(2 * np.pi) + logdet
                        + resid @ np.linalg.solve(cov, resid))
    return float(total)
