"""One ADMM sweep over the mean coefficients under pairwise SCAD fusion.

All pairwise quantities are stored as (n_pairs, q) arrays ordered like
``numpy.triu_indices(n, 1)``.  The pairwise difference operator and its
adjoint are applied through a sparse incidence matrix; the dense
Kronecker forms are never materialized.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.linalg import cho_factor, cho_solve

from .basis import OrthoSplineBasis
from .errors import ConfigurationError, NumericError
from .model import ConditionalMoments, LongitudinalDataset

__all__ = [
    "PenaltyConfig",
    "FusionState",
    "ConvergenceState",
    "pair_indices",
    "incidence_matrix",
    "pairwise_differences",
    "pairwise_adjoint",
    "update_beta",
    "scad_prox",
    "update_duals",
    "check_convergence",
]


def pair_indices(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Index arrays (i, j) over all pairs i < j."""
    return np.triu_indices(n, 1)


def incidence_matrix(n: int) -> sp.csr_matrix:
    """Signed pair incidence matrix, shape (n_pairs, n).

    Row (i, j) has +1 at i and -1 at j; the Kronecker-structured
    difference operator acts as ``incidence @ beta`` on the (n, q)
    coefficient matrix.
    """
    ii, jj = pair_indices(n)
    npairs = ii.size
    rows = np.repeat(np.arange(npairs), 2)
    cols = np.column_stack([ii, jj]).ravel()
    vals = np.tile([1.0, -1.0], npairs)
    return sp.csr_matrix((vals, (rows, cols)), shape=(npairs, n))


def pairwise_differences(D: sp.csr_matrix, beta: np.ndarray) -> np.ndarray:
    """beta_i - beta_j for all pairs i < j, shape (n_pairs, q)."""
    return D @ beta


def pairwise_adjoint(D: sp.csr_matrix, z: np.ndarray) -> np.ndarray:
    """Adjoint of the pairwise difference operator, shape (n, q)."""
    return D.T @ z


@dataclass
class PenaltyConfig:
    """SCAD fusion penalty constants."""

    tau: float
    gamma: float = 3.0
    vartheta: float = 1.0

    def __post_init__(self):
        if self.tau < 0:
            raise ConfigurationError(f"tau must be >= 0, got {self.tau}")
        if self.vartheta <= 0:
            raise ConfigurationError("vartheta must be positive")
        if self.gamma <= 1.0 + 1.0 / self.vartheta:
            raise ConfigurationError(
                f"gamma must exceed 1 + 1/vartheta = {1 + 1 / self.vartheta}"
            )


@dataclass
class FusionState:
    """ADMM split variables, duals and pairwise weights.

    ``delta`` and ``duals`` are (n_pairs, q); ``weights`` is the
    flattened upper triangle of the symmetric weight matrix.
    """

    delta: np.ndarray
    duals: np.ndarray
    penalty: PenaltyConfig
    weights: np.ndarray

    def __post_init__(self):
        if self.delta.shape != self.duals.shape:
            raise ConfigurationError("delta/duals shape mismatch")
        if self.weights.shape != (self.delta.shape[0],):
            raise ConfigurationError("weights shape mismatch")
        if not np.all(np.isfinite(self.weights)) or np.any(self.weights <= 0):
            raise ConfigurationError("weights must be finite and positive")


@dataclass
class ConvergenceState:
    """Primal/dual residual norms and their thresholds."""

    r_norm: float
    s_norm: float
    eps_pri: float
    eps_dual: float
    eps_abs: float = 1e-4
    eps_rel: float = 1e-2


@dataclass
class _BetaSystem:
    """Cached factorization of the beta linear system.

    The system matrix blockdiag(B_i^T B_i + c n I) - c (J kron I_q),
    c = vartheta * nbar, is constant across iterations, so its block
    Cholesky factors and the q x q Woodbury capacitance are reused.
    """

    factors: list
    shared: bool
    cap_factor: object
    c: float

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        # rhs is (n, q); block solve then rank-q correction over the
        # all-ones direction.
        if self.shared:
            x0 = cho_solve(self.factors[0], rhs.T).T
        else:
            x0 = np.stack([cho_solve(f, rhs[i]) for i, f in enumerate(self.factors)])
        s = x0.sum(axis=0)
        w = cho_solve(self.cap_factor, s)
        if self.shared:
            corr = cho_solve(self.factors[0], w)
            return x0 + corr[None, :]
        return x0 + np.stack([cho_solve(f, w) for f in self.factors])


def build_beta_system(data: LongitudinalDataset, basis: OrthoSplineBasis,
                      vartheta: float) -> _BetaSystem:
    """Factor the beta system once per fit."""
    designs = data.design_matrices(basis)
    n = data.n
    q = basis.dimension
    nbar = float(data.n_obs.mean())
    c = vartheta * nbar
    shared = data.shared_grid() is not None
    try:
        if shared:
            G = designs[0].T @ designs[0] + c * n * np.eye(q)
            factors = [cho_factor(G)]
            Ginv_sum = n * cho_solve(factors[0], np.eye(q))
        else:
            factors = []
            Ginv_sum = np.zeros((q, q))
            for B in designs:
                G = B.T @ B + c * n * np.eye(q)
                f = cho_factor(G)
                factors.append(f)
                Ginv_sum += cho_solve(f, np.eye(q))
        # Capacitance of the Woodbury correction for -c * (J kron I_q).
        cap = np.eye(q) / c - Ginv_sum
        cap_factor = cho_factor((cap + cap.T) / 2.0)
    except np.linalg.LinAlgError as exc:
        raise NumericError("beta system is not positive definite") from exc
    return _BetaSystem(factors=factors, shared=shared,
                       cap_factor=cap_factor, c=c)


def update_beta(data: LongitudinalDataset, basis: OrthoSplineBasis,
                theta: np.ndarray | None, moments: ConditionalMoments | None,
                state: FusionState, system: _BetaSystem | None = None,
                D: sp.csr_matrix | None = None) -> np.ndarray:
    """Exact minimizer of the augmented Lagrangian in beta.

    ``system`` and ``D`` may be passed to reuse cached factorizations
    across iterations.
    """
    if system is None:
        system = build_beta_system(data, basis, state.penalty.vartheta)
    if D is None:
        D = incidence_matrix(data.n)
    designs = data.design_matrices(basis)
    nbar = float(data.n_obs.mean())
    vt = state.penalty.vartheta

    if data.shared_grid() is not None:
        B = designs[0]
        target = data.value_matrix()
        if moments is not None:
            target = target - moments.m @ (B @ theta).T
        rhs = target @ B
    else:
        rhs = np.empty((data.n, basis.dimension))
        for i, c in enumerate(data.curves):
            resid = c.values
            if moments is not None:
                resid = resid - designs[i] @ theta @ moments.m[i]
            rhs[i] = designs[i].T @ resid
    rhs += vt * nbar * pairwise_adjoint(D, state.delta - state.duals / vt)
    return system.solve(rhs)


def scad_prox(sigma_vec: np.ndarray, tau_c, gamma: float,
              vartheta: float) -> np.ndarray:
    """Groupwise SCAD proximal operator.

    Vectorized over rows of ``sigma_vec`` (n_pairs, q) with per-row
    effective penalty levels ``tau_c``; also accepts a single vector.
    Ties at branch boundaries resolve to the lower branch.
    """
    single = sigma_vec.ndim == 1
    sig = np.atleast_2d(np.asarray(sigma_vec, dtype=float))
    tau_c = np.broadcast_to(np.asarray(tau_c, dtype=float), (sig.shape[0],))
    norms = np.linalg.norm(sig, axis=1)
    safe = np.where(norms > 0, norms, 1.0)

    b1 = norms <= tau_c + tau_c / vartheta
    b3 = norms > gamma * tau_c
    b2 = ~(b1 | b3)
    scale = np.ones_like(norms)
    scale[b1] = np.maximum(1.0 - tau_c[b1] / vartheta / safe[b1], 0.0)
    mid = np.maximum(
        1.0 - gamma * tau_c[b2] / ((gamma - 1.0) * vartheta) / safe[b2], 0.0)
    scale[b2] = mid / (1.0 - 1.0 / ((gamma - 1.0) * vartheta))
    out = scale[:, None] * sig
    return out[0] if single else out


def update_delta(state: FusionState, beta_new: np.ndarray,
                 D: sp.csr_matrix) -> np.ndarray:
    """SCAD prox applied to beta differences plus scaled duals."""
    vt = state.penalty.vartheta
    sig = pairwise_differences(D, beta_new) + state.duals / vt
    return scad_prox(sig, state.penalty.tau * state.weights,
                     state.penalty.gamma, vt)


def update_duals(state: FusionState, beta_new: np.ndarray,
                 delta_new: np.ndarray, D: sp.csr_matrix) -> np.ndarray:
    """Standard scaled dual ascent step."""
    vt = state.penalty.vartheta
    return state.duals + vt * (pairwise_differences(D, beta_new) - delta_new)


def check_convergence(state: FusionState, beta: np.ndarray,
                      delta_prev: np.ndarray, delta_new: np.ndarray,
                      D: sp.csr_matrix, eps_abs: float = 1e-4,
                      eps_rel: float = 1e-2) -> tuple[ConvergenceState, bool]:
    """Boyd-style primal/dual residual stopping test."""
    n, q = beta.shape
    npairs = delta_new.shape[0]
    vt = state.penalty.vartheta
    Ab = pairwise_differences(D, beta)
    r_norm = float(np.linalg.norm(Ab - delta_new))
    s_norm = float(vt * np.linalg.norm(pairwise_adjoint(D, delta_new - delta_prev)))
    eps_pri = np.sqrt(npairs * q) * eps_abs + eps_rel * max(
        np.linalg.norm(Ab), np.linalg.norm(delta_new))
    eps_dual = np.sqrt(n * q) * eps_abs + eps_rel * np.linalg.norm(
        pairwise_adjoint(D, state.duals))
    conv = ConvergenceState(r_norm=r_norm, s_norm=s_norm,
                            eps_pri=float(eps_pri), eps_dual=float(eps_dual),
                            eps_abs=eps_abs, eps_rel=eps_rel)
    return conv, (r_norm <= eps_pri and s_norm <= eps_dual)
