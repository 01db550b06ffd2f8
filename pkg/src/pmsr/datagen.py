"""Synthetic data generators for the desk-scale scenarios.

Everything draws from caller-supplied stdlib generators so runs replay
identically across platforms.
"""

from __future__ import annotations

import math
from random import Random

from .mapper import REAL, LocalDataset

# Employment-style baseline over 18 industry categories (sums to 1).
INDUSTRY_CATEGORIES = (
    "technology",
    "finance",
    "legal",
    "healthcare",
    "education",
    "manufacturing",
    "retail",
    "government",
    "hospitality",
    "construction",
    "transport",
    "agriculture",
    "energy",
    "media",
    "real_estate",
    "nonprofit",
    "defense",
    "services",
)

INDUSTRY_BASELINE = {
    "technology": 0.050,
    "finance": 0.050,
    "legal": 0.030,
    "healthcare": 0.110,
    "education": 0.090,
    "manufacturing": 0.090,
    "retail": 0.100,
    "government": 0.070,
    "hospitality": 0.080,
    "construction": 0.060,
    "transport": 0.050,
    "agriculture": 0.020,
    "energy": 0.020,
    "media": 0.030,
    "real_estate": 0.030,
    "nonprofit": 0.030,
    "defense": 0.020,
    "services": 0.070,
}


def sleep_scores(rng: Random, days: int = 365) -> LocalDataset:
    """One participant's daily sleep scores: uniform integers in [50, 100]."""
    records = tuple(
        {"index": d, "sleep_score": rng.randint(50, 100)} for d in range(days)
    )
    return LocalDataset(records, REAL)


def uniform_scores(rng: Random, n_records: int = 30, lo: int = 0, hi: int = 100) -> LocalDataset:
    records = tuple(
        {"index": i, "score": rng.randint(lo, hi)} for i in range(n_records)
    )
    return LocalDataset(records, REAL)


def boosted_category_weights(boost: dict[str, float]) -> dict[str, float]:
    """Scale chosen categories by their factor and spread the slack evenly
    over the rest, so a boosted category's expected representation ratio
    equals its factor exactly."""
    boosted_mass = sum(INDUSTRY_BASELINE[c] * f for c, f in boost.items())
    plain_mass = sum(v for c, v in INDUSTRY_BASELINE.items() if c not in boost)
    if boosted_mass >= 1.0 or plain_mass <= 0:
        raise ValueError("boost factors leave no probability mass for other categories")
    shrink = (1.0 - boosted_mass) / plain_mass
    return {
        c: v * (boost[c] if c in boost else shrink)
        for c, v in INDUSTRY_BASELINE.items()
    }


IMPRESSION_ALPHA = 1.16  # sampled Gini of a few thousand items centers near 0.68


def pareto_item_counts(
    rng: Random, n_items: int, alpha: float = IMPRESSION_ALPHA, scale: float = 20.0
) -> list[int]:
    """Per-item impression counts with a heavy tail.

    The default alpha is calibrated empirically: the finite-sample Gini of
    the counts sits around 0.68 (the distribution-level value overshoots
    because rare huge draws are under-represented in any one sample).
    """
    return [max(1, round(rng.paretovariate(alpha) * scale)) for _ in range(n_items)]


def impression_events(
    rng: Random,
    n_items: int = 400,
    alpha: float = IMPRESSION_ALPHA,
    boost: dict[str, float] | None = None,
) -> LocalDataset:
    """Impression log: one record per event carrying the item shown and the
    viewer's industry category.

    Per-item volumes are Pareto-heavy (recommendation concentration); the
    category is drawn per event from the boosted weights, so a category
    boosted by factor f shows an expected representation ratio of exactly f.
    """
    weights = boosted_category_weights(boost or {})
    cats = list(INDUSTRY_CATEGORIES)
    cum = []
    acc = 0.0
    for c in cats:
        acc += weights[c]
        cum.append(acc)

    def draw_category() -> int:
        u = rng.random() * acc
        for i, edge in enumerate(cum):
            if u < edge:
                return i
        return len(cats) - 1

    counts = pareto_item_counts(rng, n_items, alpha)
    records = []
    idx = 0
    for item, count in enumerate(counts):
        for _ in range(count):
            records.append({"index": idx, "item": item, "category": draw_category()})
            idx += 1
    return LocalDataset(tuple(records), REAL)


def log_softmax(logits: list[float]) -> list[float]:
    m = max(logits)
    lse = m + math.log(math.fsum(math.exp(x - m) for x in logits))
    return [x - lse for x in logits]


def model_logprobs(
    rng: Random,
    truths: list[int],
    accuracy: float,
    n_choices: int = 4,
    margin: float = 0.3,
) -> LocalDataset:
    """Synthetic per-question log-probability vectors for one model.

    The model's top choice is the true answer with the given probability and
    a uniformly random wrong one otherwise; the top logit is lifted above the
    rest so realized accuracy tracks the draw exactly.
    """
    records = []
    for q, truth in enumerate(truths):
        logits = [rng.gauss(0.0, 1.0) for _ in range(n_choices)]
        if rng.random() < accuracy:
            pick = truth
        else:
            wrong = [c for c in range(n_choices) if c != truth]
            pick = wrong[rng.randrange(len(wrong))]
        logits[pick] = max(logits) + margin + abs(rng.gauss(0.0, 0.75))
        lps = log_softmax(logits)
        rec = {"index": q, "item": q}
        for c, lp in enumerate(lps):
            rec[f"lp{c}"] = lp
        records.append(rec)
    return LocalDataset(tuple(records), REAL)
