"""Evaluation metrics for simulation studies."""

from __future__ import annotations

import numpy as np
import pandas as pd
from scipy.special import comb

from .errors import DataError

__all__ = ["adjusted_rand_index", "rmse", "summarize_replicates"]


def adjusted_rand_index(p1: dict, p2: dict) -> float:
    """Hubert-Arabie adjusted Rand index between two partitions.

    Partitions are mappings item -> label over the same item set.
    Identical partitions score 1; the expectation under independent
    random partitions is 0 (negative values are possible).
    """
    if set(p1) != set(p2):
        raise DataError("partitions are over different item sets")
    items = sorted(p1, key=str)
    a = pd.factorize(np.asarray([p1[x] for x in items]))[0]
    b = pd.factorize(np.asarray([p2[x] for x in items]))[0]
    table = np.zeros((a.max() + 1, b.max() + 1), dtype=np.int64)
    np.add.at(table, (a, b), 1)
    n = len(items)
    sum_cells = comb(table, 2).sum()
    sum_rows = comb(table.sum(axis=1), 2).sum()
    sum_cols = comb(table.sum(axis=0), 2).sum()
    total = comb(n, 2)
    expected = sum_rows * sum_cols / total
    max_index = (sum_rows + sum_cols) / 2.0
    if max_index == expected:
        return 1.0
    return float((sum_cells - expected) / (max_index - expected))


def rmse(estimated_means: list[np.ndarray], true_means: list[np.ndarray]) -> float:
    """Root mean squared error of fitted mean curves on observation grids."""
    if len(estimated_means) != len(true_means):
        raise DataError("mismatched number of curves")
    total = 0.0
    for est, tru in zip(estimated_means, true_means):
        est = np.asarray(est, dtype=float)
        tru = np.asarray(tru, dtype=float)
        if est.shape != tru.shape:
            raise DataError("mismatched grids between estimated and true means")
        total += np.sum((est - tru) ** 2)
    return float(np.sqrt(total / len(estimated_means)))


SUMMARY_COLUMNS = ["K_hat_mean", "K_hat_sd", "ARI_mean", "ARI_sd",
                   "P_mean", "P_sd", "RMSE_mean"]


def summarize_replicates(results: list[dict]) -> pd.DataFrame:
    """Mean/sd summary across replicates, one row per method label.

    Each result dict carries: method, K_hat, ARI, P, RMSE.  Sample
    standard deviation is reported (0 for a single replicate).
    """
    if not results:
        raise DataError("need at least one replicate")
    df = pd.DataFrame(results)
    if "method" not in df:
        df["method"] = "fit"

    def sd(x):
        return float(np.std(x, ddof=1)) if len(x) > 1 else 0.0

    rows = []
    for method, g in df.groupby("method", sort=False):
        rows.append({
            "method": method,
            "K_hat_mean": float(np.mean(g["K_hat"])),
            "K_hat_sd": sd(g["K_hat"]),
            "ARI_mean": float(np.mean(g["ARI"])),
            "ARI_sd": sd(g["ARI"]),
            "P_mean": float(np.mean(g["P"])),
            "P_sd": sd(g["P"]),
            "RMSE_mean": float(np.mean(g["RMSE"])),
        })
    return pd.DataFrame(rows, columns=["method"] + SUMMARY_COLUMNS)
