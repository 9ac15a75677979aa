"""Plan-quality metrics: Q-Error, P-Error, percentiles, correlation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import DegenerateVariance, EmptyInput, ZeroCostPlan
from .oracle import CardinalityMap
from .planner import CostParams, ppc
from .queryir import Query


def q_error(estimated: float, truth: float) -> float:
    """max(est/true, true/est); truth below one row is clamped to one.

    Callers flag clamped (zero-truth) sub-plans in their output; the value
    convention here is max(estimated, 1).
    """
    if estimated <= 0 or not math.isfinite(estimated):
        raise ValueError(f"estimated cardinality must be positive and finite, got {estimated}")
    t = max(truth, 1.0)
    e = max(estimated, 1.0)
    return max(e / t, t / e)


def p_error(query: Query, estimated_map: CardinalityMap, truth_map: CardinalityMap,
            params: CostParams) -> float:
    """True cost of the estimated plan over true cost of the true-card plan."""
    denom = ppc(query, truth_map, truth_map, params)
    if denom <= 0:
        raise ZeroCostPlan(f"query {query.id!r}: true plan cost is zero")
    numer = ppc(query, estimated_map, truth_map, params)
    return numer / denom


def percentile(values, p: int) -> float:
    """Nearest-rank percentile: element ceil(p/100 * n) of the sorted list."""
    if not values:
        raise EmptyInput("percentile of an empty list")
    if not 1 <= p <= 100:
        raise ValueError(f"percentile must be in 1..100, got {p}")
    ordered = sorted(values)
    rank = math.ceil(p / 100 * len(ordered))
    return float(ordered[max(rank, 1) - 1])


def pearson(xs, ys) -> float:
    if len(xs) != len(ys) or not xs:
        raise ValueError("pearson needs two equal-length non-empty series")
    n = len(xs)
    mx = sum(xs) / n
    my = sum(ys) / n
    sxx = sum((x - mx) ** 2 for x in xs)
    syy = sum((y - my) ** 2 for y in ys)
    if sxx == 0 or syy == 0:
        raise DegenerateVariance("a series with zero variance has no correlation")
    sxy = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    return sxy / math.sqrt(sxx * syy)


@dataclass
class ErrorDistribution:
    method: str
    values: list[float] = field(default_factory=list)

    def percentiles(self) -> dict[str, float]:
        return {
            "p50": percentile(self.values, 50),
            "p90": percentile(self.values, 90),
            "p99": percentile(self.values, 99),
        }
