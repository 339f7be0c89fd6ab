import math
import random

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import linear_percentile, population_std
from oshealth.analysis import (
    HIGHER_BETTER,
    LOWER_BETTER,
    MISSING,
    CoverageError,
    EvalOutcome,
    cohen_threshold,
    feature_usage,
    percentile_summary,
    summarize,
    win_flags,
    win_rates,
)
from oshealth.data import FEATURES, IndicatorId
from oshealth.learners import LearnerKind, RegressionTree, cart_fit
from oshealth.metrics import MetricValue

A, B, C = LearnerKind.KNN, LearnerKind.LNR, LearnerKind.CART


def outcome(project, learner, mre, sa=0.0, horizon=1, indicator=IndicatorId.COMMIT, used=()):
    sa_val = MetricValue("SA", sa, True) if sa is not None else MetricValue("SA", math.nan, False)
    return EvalOutcome(project, indicator, horizon, learner, 0.0, 1.0,
                       MetricValue("MRE", mre, True), sa_val, used_features=tuple(used))


def test_worked_cohen_example():
    vals = [0.10, 0.11, 0.50]
    d = cohen_threshold(vals)
    # exact population sigma is sqrt(0.104067/3) = 0.186250
    assert population_std(vals) == pytest.approx(0.186250, abs=5e-7)
    assert d.d == pytest.approx(0.3 * population_std(vals), rel=1e-12)
    # the commonly quoted d of 0.05597 agrees to three significant figures
    assert d.d == pytest.approx(0.05597, rel=2e-3)
    flags = win_flags({"A": 0.10, "B": 0.11, "C": 0.50}, LOWER_BETTER, d)
    assert flags == {"A": True, "B": True, "C": False}


def test_cohen_edge_cases():
    assert cohen_threshold([0.4, 0.4, 0.4]).d == 0
    assert cohen_threshold([1.0, 1.1, 5.0]).d == pytest.approx(10 * cohen_threshold([0.1, 0.11, 0.5]).d)
    with pytest.raises(ValueError):
        cohen_threshold([0.3])


def test_ties_and_single_learner():
    assert win_flags({"A": 0.2, "B": 0.2}, LOWER_BETTER, 0.0) == {"A": True, "B": True}
    assert win_flags({"A": 7.0}, HIGHER_BETTER, 0.0) == {"A": True}
    assert win_flags({"A": 10.0, "B": 50.0}, HIGHER_BETTER, 1.0) == {"A": False, "B": True}


@given(st.lists(st.floats(0.001, 100), min_size=2, max_size=6), st.floats(0.01, 100))
def test_at_least_one_winner_and_best_wins(values, _):
    per = dict(enumerate(values))
    flags = win_flags(per, LOWER_BETTER, cohen_threshold(values))
    assert flags[min(per, key=per.get)]


def test_argmax_invariance_under_scaling():
    rng = random.Random(123)
    for _ in range(100):
        vals = {f"L{i}": rng.uniform(0.01, 2.0) for i in range(5)}
        k = rng.uniform(0.01, 100.0)
        base = win_flags(vals, LOWER_BETTER, cohen_threshold(vals.values()))
        scaled_vals = {n: k * v for n, v in vals.items()}
        scaled = win_flags(scaled_vals, LOWER_BETTER, cohen_threshold(scaled_vals.values()))
        assert base == scaled


def test_win_rates_strict_best():
    outs = [outcome(p, A, 0.1) for p in "xy"] + [outcome(p, B, 0.9) for p in "xy"]
    wr = win_rates(outs, "MRE", IndicatorId.COMMIT, 1)
    assert wr.rates == {A: 100.0, B: 0.0}


def test_win_rates_universal_tie():
    outs = [outcome(p, k, 0.3) for p in "xyz" for k in (A, B, C)]
    assert set(win_rates(outs, "MRE", IndicatorId.COMMIT, 1).rates.values()) == {100.0}


def test_win_rates_three_projects():
    # pooled σ of these nine values is about 0.40, so d ≈ 0.12
    values = {"p1": (0.10, 0.50, 1.20), "p2": (0.10, 0.50, 1.20), "p3": (0.15, 0.10, 1.20)}
    outs = [outcome(p, k, v) for p, vs in values.items() for k, v in zip((A, B, C), vs)]
    pooled = [v for vs in values.values() for v in vs]
    d = 0.3 * population_std(pooled)
    assert 0.05 < d < 0.4
    wr = win_rates(outs, "MRE", IndicatorId.COMMIT, 1)
    assert wr.d == pytest.approx(d)
    assert wr.rates[A] == 100.0
    assert wr.rates[C] == 0.0
    assert wr.rates[B] == pytest.approx(100 / 3)


def test_win_rates_coverage_error():
    outs = [outcome("x", A, 0.1), outcome("x", B, 0.2), outcome("y", A, 0.1)]
    with pytest.raises(CoverageError, match="'y', 'LNR'"):
        win_rates(outs, "MRE", IndicatorId.COMMIT, 1)


def test_sa_undefined_projects_are_excluded():
    outs = [outcome("x", A, 0.1, sa=50), outcome("x", B, 0.1, sa=10),
            outcome("y", A, 0.1, sa=None), outcome("y", B, 0.1, sa=20)]
    wr = win_rates(outs, "SA", IndicatorId.COMMIT, 1)
    assert (wr.projects, wr.excluded) == (1, 1)
    assert wr.rates == {A: 100.0, B: 0.0}


@given(st.lists(st.tuples(st.floats(0, 5), st.floats(0, 5)), min_size=1, max_size=8))
def test_rate_at_least_strict_best_fraction(rows):
    outs = [o for i, (a, b) in enumerate(rows) for o in (outcome(str(i), A, a), outcome(str(i), B, b))]
    wr = win_rates(outs, "MRE", IndicatorId.COMMIT, 1)
    strict = 100.0 * sum(a < b for a, b in rows) / len(rows)
    assert wr.rates[A] >= strict - 1e-9
    assert wr.rates[A] + wr.rates[B] >= 100.0 - 1e-9


def stump(feature: int, p: int = 11) -> RegressionTree:
    X = np.zeros((4, p))
    X[2:, feature] = 1.0
    return cart_fit((X, np.array([0.0, 0.0, 5.0, 5.0])))


def test_feature_usage_counts_per_tree():
    target = IndicatorId.STAR
    names = [f for f in FEATURES if f != "stars"]
    trees = {"a": stump(names.index("commits")), "b": stump(names.index("forks"))}
    fu = feature_usage(trees, target)
    assert fu.cell("commits") == 50.0 and fu.cell("forks") == 50.0
    assert fu.cell("stars") is None
    assert sum(fu.counts.values()) == 2
    assert feature_usage(dict(reversed(list(trees.items()))), target).percentages == fu.percentages
    leaf_only = RegressionTree.from_dict({"leaf": 1.0, "n": 4}, 11)
    assert set(feature_usage({"x": leaf_only}, target).percentages.values()) == {0.0}
    with pytest.raises(ValueError):
        feature_usage({}, target)


def test_percentile_summary_example():
    median, iqr = percentile_summary([0.1, 0.2, 0.3, 0.4])
    assert median == pytest.approx(0.25)
    assert iqr == pytest.approx(0.15)
    assert median == pytest.approx(linear_percentile([0.1, 0.2, 0.3, 0.4], 50))


def test_summarize_tables():
    outs = []
    for h in (1, 3):
        for i, v in enumerate((0.1, 0.2, 0.3, 0.4)):
            outs.append(outcome(f"p{i}", A, v, sa=None, horizon=h, used=("commits",)))
            outs.append(outcome(f"p{i}", LearnerKind.DECART, v, sa=10.0, horizon=h, used=("forks",)))
    rep = summarize(outs)
    med = rep["mre_median_h1"]
    assert med.header == ["indicator", "KNN", "DECART"]
    assert med.rows[0][1] == pytest.approx(25.0)
    assert rep["mre_iqr_h1"].rows[0][1] == pytest.approx(15.0)
    assert rep["ratio_mre_median_KNN"].rows[0][1:] == [100.0, 100.0]
    assert rep["sa_excluded_h1"].rows[0][1:] == [100.0, 0.0]
    text = rep["sa_median_h1"].to_text()
    assert MISSING in text and "10%" in text
    usage = rep["feature_usage_h1"].rows[0]
    assert usage[1 + FEATURES.index("commits")] == "n/a"
    assert usage[1 + FEATURES.index("forks")] == 100.0
    assert "25%" in rep["mre_median_h1"].to_text()


def test_summarize_empty():
    with pytest.raises(ValueError):
        summarize([])
