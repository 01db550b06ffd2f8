"""Shared descriptive statistics for reports and the audit analytics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

from .errors import CategoryMismatch, Empty, ZeroBaseline


@dataclass(frozen=True)
class SummaryStats:
    n: int
    mean: float
    median: float
    p95: float
    min: float
    max: float


def summarize(values: Sequence[float]) -> SummaryStats:
    """Mean, lower-of-middle-two median, nearest-rank p95, min, max.

    The tie rules are fixed so golden report files stay stable.
    """
    if not values:
        raise Empty("summarize of an empty list")
    ordered = sorted(values)
    n = len(ordered)
    median = ordered[(n - 1) // 2]
    p95 = ordered[math.ceil(0.95 * n) - 1]
    return SummaryStats(
        n=n,
        mean=math.fsum(ordered) / n,
        median=median,
        p95=p95,
        min=ordered[0],
        max=ordered[-1],
    )


def representation_ratio(
    observed: Mapping[str, float], baseline: Mapping[str, float]
) -> dict[str, float]:
    """Per-category ratio of the observed share to a baseline proportion.

    A ratio of 3.0 means the category appears three times as often as the
    baseline says it should. Baseline proportions must sum to one.
    """
    if set(observed) != set(baseline):
        raise CategoryMismatch("observed and baseline categories differ")
    if abs(math.fsum(baseline.values()) - 1.0) > 1e-9:
        raise ValueError("baseline proportions must sum to 1")
    total = math.fsum(observed.values())
    if total <= 0:
        raise ZeroBaseline("no observations")
    ratios = {}
    for cat in observed:
        if baseline[cat] <= 0:
            raise ZeroBaseline(f"baseline for {cat!r} is zero")
        ratios[cat] = (observed[cat] / total) / baseline[cat]
    return ratios
