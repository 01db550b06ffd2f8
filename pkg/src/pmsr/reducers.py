"""Reduce-function registry and the analytics it releases.

All registered reductions share one structure: contributions are folded
component-wise in the share domain (a linear sum), and a finish step runs on
the reconstructed aggregate at the coordinator quorum. Linear reductions
(sum, mean, histogram merge) finish trivially; comparison-based ones (gini,
top-decile share, the ensemble argmax) run only on the aggregate, never on
individual contributions, and release a single scalar.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

from .errors import DimensionMismatch, Empty, ZeroMean, ZeroTotal


def gini(values: Sequence[float]) -> float:
    """Inequality in [0, 1): mean absolute pairwise difference over twice the mean.

    Computed via the sorted-rank identity, which is algebraically equal to
    sum_ij |x_i - x_j| / (2 n^2 mu) but O(n log n).
    """
    values = list(values)
    if not values:
        raise Empty("gini of an empty list")
    if any(v < 0 for v in values):
        raise ValueError("gini requires non-negative values")
    n = len(values)
    total = math.fsum(values)
    if total <= 0:
        raise ZeroMean("gini requires a positive mean")
    ordered = sorted(values)
    weighted = math.fsum((i + 1) * v for i, v in enumerate(ordered))
    return 2.0 * weighted / (n * total) - (n + 1) / n


def top_decile_share(values: Sequence[float]) -> float:
    """Fraction of the total held by the largest ceil(n/10) values."""
    values = list(values)
    if not values:
        raise Empty("top_decile_share of an empty list")
    total = math.fsum(values)
    if total <= 0:
        raise ZeroTotal("top_decile_share requires a positive total")
    k = math.ceil(0.1 * len(values))
    top = sorted(values, reverse=True)[:k]
    return math.fsum(top) / total


def gac_ensemble(logprobs: Sequence[Sequence[float]], weights: Sequence[float]) -> int:
    """Weighted log-probability ensembling: argmax over choices of the
    weighted per-model sum. Weights are normalized to sum to one (the argmax
    is invariant under positive rescaling); ties break toward the lowest
    choice index.
    """
    if not logprobs:
        raise DimensionMismatch("no model rows")
    if len(weights) != len(logprobs):
        raise DimensionMismatch(f"{len(logprobs)} rows vs {len(weights)} weights")
    if any(w <= 0 for w in weights):
        raise ValueError("weights must be positive")
    width = len(logprobs[0])
    if width == 0 or any(len(row) != width for row in logprobs):
        raise DimensionMismatch("ragged log-probability matrix")
    for row in logprobs:
        if any(not math.isfinite(x) for x in row):
            raise ValueError("log-probabilities must be finite")
    wsum = math.fsum(weights)
    combined = [
        math.fsum(w / wsum * row[c] for w, row in zip(weights, logprobs))
        for c in range(width)
    ]
    return argmax_lowest(combined)


def argmax_lowest(values: Sequence[float]) -> int:
    """Index of the maximum, lowest index on ties."""
    best, best_i = values[0], 0
    for i, v in enumerate(values):
        if v > best:
            best, best_i = v, i
    return best_i


def theoretical_max(correct: Sequence[Sequence[bool]]) -> float:
    """Fraction of rows (questions) answered correctly by at least one column
    (model)."""
    rows = list(correct)
    if not rows:
        raise Empty("empty correctness matrix")
    return sum(1 for row in rows if any(row)) / len(rows)


# --- registry -------------------------------------------------------------------
#
# finish(decoded, n, params) -> released value, where `decoded` maps each
# schema field name to its decoded aggregate (float, or list of floats for
# vector/histogram fields) and n is the participant count.


def _only_vector(decoded: dict) -> list[float]:
    vectors = [v for v in decoded.values() if isinstance(v, list)]
    if len(vectors) != 1:
        raise DimensionMismatch("reduction expects exactly one vector field")
    return vectors[0]


def _finish_sum(decoded, n, params):
    return decoded


def _finish_mean(decoded, n, params):
    out = {}
    for name, v in decoded.items():
        if isinstance(v, list):
            out[name] = [x / n for x in v]
        else:
            out[name] = v / n
    return out


def _finish_histogram_merge(decoded, n, params):
    # aggregate counts arrive as integer-valued reals; release them as ints
    out = {}
    for name, v in decoded.items():
        if isinstance(v, list):
            out[name] = [int(round(x)) for x in v]
        else:
            out[name] = int(round(v))
    return out


def _finish_gini(decoded, n, params):
    return {"gini": gini(_only_vector(decoded))}


def _finish_top_decile(decoded, n, params):
    return {"top_decile_share": top_decile_share(_only_vector(decoded))}


def _finish_gac(decoded, n, params):
    # contributions were weighted node-side, so the aggregate vector is the
    # weighted sum already; only the argmax happens here
    return {"choice": argmax_lowest(_only_vector(decoded))}


def _finish_theo_max(decoded, n, params):
    # aggregate is a per-question count of correct models; a question is
    # covered when at least one model answered it correctly
    counts = _only_vector(decoded)
    if not counts:
        raise Empty("empty coverage vector")
    return {"theo_max": sum(1 for c in counts if c >= 0.5) / len(counts)}


@dataclass(frozen=True)
class ReduceEntry:
    name: str
    finish: Callable


REDUCE_REGISTRY = {
    e.name: e
    for e in (
        ReduceEntry("sum", _finish_sum),
        ReduceEntry("mean", _finish_mean),
        ReduceEntry("histogram_merge", _finish_histogram_merge),
        ReduceEntry("gini", _finish_gini),
        ReduceEntry("top_decile_share", _finish_top_decile),
        ReduceEntry("gac_ensemble", _finish_gac),
        ReduceEntry("theo_max", _finish_theo_max),
    )
}


def _post_clamp_nonneg(decoded):
    out = {}
    for name, v in decoded.items():
        if isinstance(v, list):
            out[name] = [max(0.0, x) for x in v]
        else:
            out[name] = max(0.0, v)
    return out


REDUCE_POST_REGISTRY = {"clamp_nonneg": _post_clamp_nonneg}


def finish_reduce(name: str, decoded: dict, n: int, params=(), post: str | None = None):
    """Apply the named finish step (and optional post-processing) to the
    reconstructed aggregate."""
    if post is not None:
        decoded = REDUCE_POST_REGISTRY[post](decoded)
    entry = REDUCE_REGISTRY.get(name)
    if entry is None:
        raise KeyError(f"unregistered reduce function {name!r}")
    return entry.finish(decoded, n, dict(params))
