"""E-step moments and M-step updates for the covariance side of the model.

Also provides the known-group EM used to produce starting values.
"""

from __future__ import annotations

import numpy as np

from .basis import OrthoSplineBasis
from .errors import GroupingError, NumericError
from .model import (
    LAMBDA_FLOOR,
    SIGMA2_FLOOR,
    ConditionalMoments,
    LongitudinalDataset,
    ModelParams,
    marginal_negative_loglikelihood,
)

__all__ = [
    "conditional_moments",
    "update_sigma2",
    "update_theta_column",
    "orthonormalize_theta",
    "known_group_em",
]


def conditional_moments(params: ModelParams, data: LongitudinalDataset,
                        basis: OrthoSplineBasis) -> ConditionalMoments:
    """Posterior mean and covariance of the scores given the observations.

    When every curve shares the same design matrix the posterior
    covariance is computed once and shared.
    """
    P = params.n_components
    if P < 1:
        raise NumericError("conditional moments require P >= 1")
    designs = data.design_matrices(basis)
    lam_inv = np.diag(1.0 / params.lam)
    shared = data.shared_grid() is not None

    def precision(B):
        F = B @ params.theta
        return F, F.T @ F + params.sigma2 * lam_inv

    m = np.empty((data.n, P))
    if shared:
        F, M = precision(designs[0])
        V_shared = params.sigma2 * np.linalg.inv(M)
        V_shared = (V_shared + V_shared.T) / 2.0
        V = [V_shared] * data.n
        R = data.value_matrix() - params.beta @ designs[0].T
        m[:] = np.linalg.solve(M, F.T @ R.T).T
    else:
        V = []
        for i, c in enumerate(data.curves):
            F, M = precision(designs[i])
            resid = c.values - designs[i] @ params.beta[i]
            m[i] = np.linalg.solve(M, F.T @ resid)
            Vi = params.sigma2 * np.linalg.inv(M)
            V.append((Vi + Vi.T) / 2.0)
    return ConditionalMoments(m=m, V=V)


def update_sigma2(params: ModelParams, moments: ConditionalMoments | None,
                  data: LongitudinalDataset, basis: OrthoSplineBasis) -> float:
    """Noise-variance update from the expected complete-data loss.

    In P = 0 mode (``moments`` None) this is the plain residual
    variance RSS / sum(n_i).
    """
    designs = data.design_matrices(basis)
    total_obs = int(data.n_obs.sum())
    if data.shared_grid() is not None:
        B = designs[0]
        R = data.value_matrix() - params.beta @ B.T
        trace = 0.0
        if moments is not None:
            F = B @ params.theta
            R = R - moments.m @ F.T
            FtF = F.T @ F
            if all(V is moments.V[0] for V in moments.V):
                trace = data.n * float(np.sum(FtF * moments.V[0]))
            else:
                trace = sum(float(np.sum(FtF * V)) for V in moments.V)
        return max((float(np.sum(R * R)) + trace) / total_obs, SIGMA2_FLOOR)
    rss = 0.0
    trace = 0.0
    for i, c in enumerate(data.curves):
        B = designs[i]
        resid = c.values - B @ params.beta[i]
        if moments is not None:
            F = B @ params.theta
            resid = resid - F @ moments.m[i]
            trace += np.trace(F @ moments.V[i] @ F.T)
        rss += resid @ resid
    return max((rss + trace) / total_obs, SIGMA2_FLOOR)


def update_theta_column(j: int, theta: np.ndarray, params: ModelParams,
                        moments: ConditionalMoments, data: LongitudinalDataset,
                        basis: OrthoSplineBasis) -> np.ndarray:
    """Closed-form update of column j of theta at fixed moments.

    Other columns are read from ``theta`` at their current values, so a
    sequential sweep j = 0..P-1 updates in place.
    """
    designs = data.design_matrices(basis)
    P = theta.shape[1]
    q = theta.shape[0]
    m = moments.m
    if data.shared_grid() is not None:
        B = designs[0]
        BtB = B.T @ B
        V = moments.V[0]
        A = BtB * float(np.sum(m[:, j] ** 2) + data.n * V[j, j])
        R = data.value_matrix() - params.beta @ B.T
        b = B.T @ (R.T @ m[:, j])
        second = m.T @ m[:, j] + data.n * V[:, j]
        second[j] = 0.0
        b -= BtB @ (theta @ second)
    else:
        A = np.zeros((q, q))
        b = np.zeros(q)
        for i, c in enumerate(data.curves):
            B = designs[i]
            BtB = B.T @ B
            m_i = m[i]
            V_i = moments.V[i]
            A += BtB * (m_i[j] ** 2 + V_i[j, j])
            resid = c.values - B @ params.beta[i]
            b += B.T @ resid * m_i[j]
            cross = np.zeros(q)
            for l in range(P):
                if l != j:
                    cross += theta[:, l] * (m_i[l] * m_i[j] + V_i[l, j])
            b -= BtB @ cross
    try:
        return np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"singular system in theta column {j} update") from exc


def _apply_sign_rule(theta: np.ndarray) -> np.ndarray:
    """Make the first max-magnitude entry of each column positive."""
    theta = theta.copy()
    for j in range(theta.shape[1]):
        col = theta[:, j]
        lead = col[np.argmax(np.abs(col))]
        if lead < 0:
            theta[:, j] = -col
    return theta


def orthonormalize_theta(theta_tilde: np.ndarray,
                         moments: ConditionalMoments) -> tuple[np.ndarray, np.ndarray]:
    """Re-orthonormalize theta and recover eigenvalues.

    Eigendecomposes theta_tilde @ Sigma @ theta_tilde^T where Sigma is
    the average second moment of the scores; returns the top-P
    eigenvectors (sign rule applied) and floored eigenvalues.
    """
    P = theta_tilde.shape[1]
    if np.linalg.matrix_rank(theta_tilde) < P:
        deficit = P - np.linalg.matrix_rank(theta_tilde)
        raise NumericError(f"theta is rank deficient by {deficit} column(s)")
    n = moments.m.shape[0]
    sigma = (moments.m.T @ moments.m) / n
    if all(V is moments.V[0] for V in moments.V):
        sigma = sigma + moments.V[0]
    else:
        sigma = sigma + sum(moments.V) / n
    M = theta_tilde @ sigma @ theta_tilde.T
    evals, evecs = np.linalg.eigh((M + M.T) / 2.0)
    order = np.argsort(evals)[::-1][:P]
    lam = np.maximum(evals[order], LAMBDA_FLOOR)
    theta = _apply_sign_rule(evecs[:, order])
    return theta, lam


def _group_design(labels: np.ndarray) -> list[np.ndarray]:
    """Member index arrays per group for contiguous labels 0..K-1."""
    K = labels.max() + 1
    groups = [np.flatnonzero(labels == k) for k in range(K)]
    if any(g.size == 0 for g in groups):
        raise GroupingError("empty group in known-group EM")
    return groups


def _update_alpha(groups, designs, data, theta, m):
    """Per-group least squares of score-adjusted observations."""
    q = designs[0].shape[1]
    alpha = np.empty((len(groups), q))
    for k, members in enumerate(groups):
        A = np.zeros((q, q))
        b = np.zeros(q)
        for i in members:
            B = designs[i]
            y = data.curves[i].values
            if theta is not None:
                y = y - B @ theta @ m[i]
            A += B.T @ B
            b += B.T @ y
        try:
            alpha[k] = np.linalg.solve(A, b)
        except np.linalg.LinAlgError as exc:
            raise GroupingError(f"singular design for group {k}") from exc
    return alpha


def known_group_em(data: LongitudinalDataset, basis: OrthoSplineBasis,
                   group_labels: np.ndarray, P: int,
                   beta_star: np.ndarray, max_iter: int = 200,
                   tol: float = 1e-6) -> ModelParams:
    """EM with the partition held fixed; used for initialization.

    Group mean coefficients are estimated by per-group regression, the
    covariance side by the same moment/update cycle as the main solver.
    The starting covariance comes from the eigendecomposition of the
    scatter of ``beta_star`` around the group fits.
    """
    labels = np.asarray(group_labels)
    if labels.shape != (data.n,):
        raise GroupingError("group labels must cover all curves")
    groups = _group_design(labels)
    designs = data.design_matrices(basis)
    q = basis.dimension

    alpha = _update_alpha(groups, designs, data, None, None)
    beta = alpha[labels]
    rss = sum((c.values - designs[i] @ beta[i]) @ (c.values - designs[i] @ beta[i])
              for i, c in enumerate(data.curves))
    sigma2 = max(rss / int(data.n_obs.sum()), SIGMA2_FLOOR)

    if P == 0:
        return ModelParams(beta=beta, theta=None, lam=None, sigma2=sigma2)

    # Coefficient scatter of the per-curve ridge fits around the group fits
    # seeds the eigenstructure.
    diffs = beta_star - beta
    scatter = diffs.T @ diffs / data.n
    evals, evecs = np.linalg.eigh((scatter + scatter.T) / 2.0)
    order = np.argsort(evals)[::-1][:P]
    theta = _apply_sign_rule(evecs[:, order])
    lam = np.maximum(evals[order], LAMBDA_FLOOR)

    params = ModelParams(beta=beta, theta=theta, lam=lam, sigma2=sigma2)
    trace: list[float] = []
    for _ in range(max_iter):
        prev = (params.beta.copy(), params.theta.copy(),
                params.lam.copy(), params.sigma2)
        moments = conditional_moments(params, data, basis)
        sigma2 = update_sigma2(params, moments, data, basis)
        theta_tilde = params.theta.copy()
        for j in range(P):
            theta_tilde[:, j] = update_theta_column(
                j, theta_tilde, params, moments, data, basis)
        theta, lam = orthonormalize_theta(theta_tilde, moments)
        alpha = _update_alpha(groups, designs, data, theta, moments.m)
        params = ModelParams(beta=alpha[labels], theta=theta, lam=lam,
                             sigma2=sigma2)
        trace.append(marginal_negative_loglikelihood(params, data, basis))
        change = max(
            np.abs(params.beta - prev[0]).max(),
            np.abs(params.theta - prev[1]).max(),
            np.abs(params.lam - prev[2]).max(),
            abs(params.sigma2 - prev[3]),
        )
        scale = max(1.0, np.abs(prev[0]).max(), abs(prev[3]))
        if change / scale < tol:
            break
    return params
