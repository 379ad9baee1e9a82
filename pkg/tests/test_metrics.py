from itertools import combinations

import numpy as np
import pytest

from fusioncurve.errors import DataError
from fusioncurve.metrics import (
    SUMMARY_COLUMNS,
    adjusted_rand_index,
    rmse,
    summarize_replicates,
)


def ari_brute_force(p1, p2):
    """Pair-counting ARI straight from the a/b/c/d contingency counts."""
    items = list(p1)
    a = b = c = d = 0
    for x, y in combinations(items, 2):
        same1 = p1[x] == p1[y]
        same2 = p2[x] == p2[y]
        if same1 and same2:
            a += 1
        elif same1 and not same2:
            b += 1
        elif not same1 and same2:
            c += 1
        else:
            d += 1
    total = a + b + c + d
    expected = (a + b) * (a + c) / total
    max_index = ((a + b) + (a + c)) / 2.0
    if max_index == expected:
        return 1.0
    return (a - expected) / (max_index - expected)


class TestAdjustedRandIndex:
    def test_identical_partitions(self):
        p = {i: i % 3 for i in range(12)}
        assert adjusted_rand_index(p, dict(p)) == pytest.approx(1.0)

    def test_label_permutation_invariance(self):
        p1 = {i: i % 3 for i in range(12)}
        p2 = {i: (i % 3 + 1) % 3 for i in range(12)}
        assert adjusted_rand_index(p1, p2) == pytest.approx(1.0)

    def test_crossed_partitions_hand_value(self):
        # {1,2 | 3,4} vs {1,3 | 2,4}: a=0, b=2, c=2, d=2 -> ARI = -1/2.
        p1 = {1: "x", 2: "x", 3: "y", 4: "y"}
        p2 = {1: "u", 2: "v", 3: "u", 4: "v"}
        assert adjusted_rand_index(p1, p2) == pytest.approx(-0.5)

    def test_singletons_vs_one_block(self):
        p1 = {i: i for i in range(6)}
        p2 = {i: 0 for i in range(6)}
        assert adjusted_rand_index(p1, p2) == pytest.approx(0.0)

    def test_matches_brute_force_random(self):
        rng = np.random.default_rng(0)
        for trial in range(20):
            n = int(rng.integers(4, 15))
            p1 = {i: int(rng.integers(0, 4)) for i in range(n)}
            p2 = {i: int(rng.integers(0, 4)) for i in range(n)}
            got = adjusted_rand_index(p1, p2)
            assert got == pytest.approx(ari_brute_force(p1, p2), abs=1e-12)

    def test_mismatched_items(self):
        with pytest.raises(DataError):
            adjusted_rand_index({1: 0, 2: 0}, {1: 0, 3: 0})


class TestRmse:
    def test_exact_match_is_zero(self):
        grids = [np.linspace(0, 1, 5), np.linspace(0, 1, 8)]
        assert rmse(grids, [g.copy() for g in grids]) == 0.0

    def test_hand_value(self):
        # Two curves, total squared error 4 -> sqrt(4 / 2) = sqrt(2).
        est = [np.array([1.0, 1.0]), np.array([0.0])]
        tru = [np.array([0.0, 0.0]), np.array([np.sqrt(2.0)])]
        assert rmse(est, tru) == pytest.approx(np.sqrt(2.0))

    def test_shape_errors(self):
        with pytest.raises(DataError):
            rmse([np.zeros(3)], [np.zeros(3), np.zeros(3)])
        with pytest.raises(DataError):
            rmse([np.zeros(3)], [np.zeros(4)])


class TestSummary:
    def test_schema_and_values(self):
        results = [
            {"method": "FDA", "K_hat": 3, "ARI": 1.0, "P": 2, "RMSE": 0.1},
            {"method": "FDA", "K_hat": 5, "ARI": 0.5, "P": 2, "RMSE": 0.3},
            {"method": "IND", "K_hat": 8, "ARI": 0.2, "P": 0, "RMSE": 0.4},
        ]
        df = summarize_replicates(results)
        assert list(df.columns) == ["method"] + SUMMARY_COLUMNS
        fda = df[df["method"] == "FDA"].iloc[0]
        assert fda["K_hat_mean"] == pytest.approx(4.0)
        assert fda["K_hat_sd"] == pytest.approx(np.std([3, 5], ddof=1))
        assert fda["ARI_mean"] == pytest.approx(0.75)
        assert fda["RMSE_mean"] == pytest.approx(0.2)
        ind = df[df["method"] == "IND"].iloc[0]
        assert ind["K_hat_sd"] == 0.0 and ind["P_mean"] == 0.0

    def test_empty_raises(self):
        with pytest.raises(DataError):
            summarize_replicates([])
