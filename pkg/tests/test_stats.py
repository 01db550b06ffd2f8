"""Descriptive statistics and representation ratios."""

from random import Random

import pytest

from pmsr.errors import CategoryMismatch, Empty, ZeroBaseline
from pmsr.stats import representation_ratio, summarize


def test_summarize_small_cases():
    s = summarize([1.0, 2.0, 3.0])
    assert s.mean == 2.0 and s.median == 2.0 and s.min == 1.0 and s.max == 3.0
    # even length: lower of the middle two
    assert summarize([1.0, 2.0, 3.0, 4.0]).median == 2.0


def test_summarize_p95_nearest_rank():
    values = [float(i) for i in range(1, 101)]
    assert summarize(values).p95 == 95.0
    assert summarize([1.0, 2.0, 3.0]).p95 == 3.0


def test_summarize_matches_sort_oracle():
    import math

    rng = Random(12)
    for _ in range(300):
        values = [rng.uniform(-50, 50) for _ in range(rng.randint(1, 200))]
        s = summarize(values)
        ordered = sorted(values)
        n = len(ordered)
        assert s.n == n
        assert s.mean == pytest.approx(sum(values) / n, rel=1e-12)
        assert s.median == ordered[(n - 1) // 2]
        assert s.p95 == ordered[math.ceil(0.95 * n) - 1]
        assert s.min == ordered[0] and s.max == ordered[-1]


def test_summarize_order_independent():
    values = [5.0, 1.0, 9.0, 3.3, 3.3]
    assert summarize(values) == summarize(sorted(values))


def test_summarize_empty():
    with pytest.raises(Empty):
        summarize([])


def test_ratio_proportional_observed_is_unity():
    baseline = {"a": 0.2, "b": 0.3, "c": 0.5}
    observed = {"a": 20.0, "b": 30.0, "c": 50.0}
    ratios = representation_ratio(observed, baseline)
    for v in ratios.values():
        assert v == pytest.approx(1.0)


def test_ratio_three_times_category():
    baseline = {"tech": 0.1, "rest": 0.9}
    # tech observed at 3x its baseline share
    observed = {"tech": 30.0, "rest": 70.0}
    ratios = representation_ratio(observed, baseline)
    assert ratios["tech"] == pytest.approx(3.0)


def test_ratio_randomized_hand_formula():
    rng = Random(13)
    for _ in range(200):
        cats = [f"c{i}" for i in range(rng.randint(2, 10))]
        weights = [rng.uniform(0.05, 1.0) for _ in cats]
        total_w = sum(weights)
        baseline = {c: w / total_w for c, w in zip(cats, weights)}
        observed = {c: rng.uniform(1.0, 500.0) for c in cats}
        ratios = representation_ratio(observed, baseline)
        total = sum(observed.values())
        for c in cats:
            assert ratios[c] == pytest.approx((observed[c] / total) / baseline[c])


def test_ratio_invariant_under_scaling():
    baseline = {"a": 0.25, "b": 0.75}
    observed = {"a": 10.0, "b": 14.0}
    r1 = representation_ratio(observed, baseline)
    r2 = representation_ratio({k: 37.0 * v for k, v in observed.items()}, baseline)
    for c in baseline:
        assert r1[c] == pytest.approx(r2[c])


def test_ratio_errors():
    with pytest.raises(CategoryMismatch):
        representation_ratio({"a": 1.0}, {"a": 0.5, "b": 0.5})
    with pytest.raises(ValueError):
        representation_ratio({"a": 1.0, "b": 1.0}, {"a": 0.4, "b": 0.4})
    with pytest.raises(ZeroBaseline):
        representation_ratio({"a": 1.0, "b": 1.0}, {"a": 1.0, "b": 0.0})
