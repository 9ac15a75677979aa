"""Attribute-independence estimator: per-column MCVs plus an equi-depth
histogram, combined across tables with the join-uniformity assumption.

Per column the top-k values are kept with exact frequencies and the rest
goes into an equi-depth histogram; MCV frequencies and bucket masses are
relative to the non-null rows and sum to one. A predicate's selectivity is
its in-region mass times the column's non-null fraction, and columns
multiply (attributes assumed mutually independent).
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

from ..catalog import Catalog, column_distinct_count
from ..queryir import Interval, Region, SubPlanQuery
from .base import EstimatorModel
from .joins import combine_uniformity


@dataclass
class ColumnHistogram:
    mcv_values: np.ndarray     # exact top-k values
    mcv_freqs: np.ndarray      # frequency of each MCV, relative to non-null rows
    bucket_edges: np.ndarray   # B+1 non-decreasing boundaries over the remainder
    bucket_masses: np.ndarray  # mass per bucket, relative to non-null rows
    bucket_distinct: np.ndarray
    nonnull_fraction: float
    remainder_rows: int

    def region_mass(self, region: Region) -> float:
        """Mass of the non-null distribution inside the region."""
        mass = 0.0
        if isinstance(region, Interval):
            if self.mcv_values.size:
                inside = (self.mcv_values >= region.lo) & (self.mcv_values <= region.hi)
                mass += float(self.mcv_freqs[inside].sum())
            mass += self._bucket_interval_mass(region.lo, region.hi)
        else:
            if not region.values:
                return 0.0
            mcv_index = {float(v): float(f) for v, f in zip(self.mcv_values, self.mcv_freqs)}
            for v in region.values:
                if float(v) in mcv_index:
                    mass += mcv_index[float(v)]
                else:
                    mass += self._bucket_point_mass(float(v))
        return min(mass, 1.0)

    def _bucket_interval_mass(self, lo: float, hi: float) -> float:
        edges, masses = self.bucket_edges, self.bucket_masses
        if edges.size == 0 or lo > hi:
            return 0.0
        total = 0.0
        for j in range(masses.size):
            b_lo, b_hi = edges[j], edges[j + 1]
            if masses[j] == 0.0 or b_hi < lo or b_lo > hi:
                continue
            if b_hi == b_lo:
                total += masses[j] if lo <= b_lo <= hi else 0.0
                continue
            overlap = min(hi, b_hi) - max(lo, b_lo)
            total += masses[j] * max(0.0, min(1.0, overlap / (b_hi - b_lo)))
        return total

    def _bucket_point_mass(self, v: float) -> float:
        edges = self.bucket_edges
        if edges.size == 0 or v < edges[0] or v > edges[-1]:
            return 0.0
        j = int(np.searchsorted(edges, v, side="right") - 1)
        j = min(max(j, 0), self.bucket_masses.size - 1)
        if self.bucket_distinct[j] == 0:
            return 0.0
        return float(self.bucket_masses[j] / self.bucket_distinct[j])


def build_column_histogram(values: np.ndarray, nulls: np.ndarray,
                           buckets: int, mcv_k: int) -> ColumnHistogram:
    present = values[~nulls]
    n = len(values)
    nn = len(present)
    if nn == 0:
        return ColumnHistogram(
            mcv_values=np.empty(0), mcv_freqs=np.empty(0),
            bucket_edges=np.empty(0), bucket_masses=np.empty(0),
            bucket_distinct=np.empty(0, dtype=np.int64),
            nonnull_fraction=0.0, remainder_rows=0,
        )
    counts = Counter(present.tolist())
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    mcv = ranked[: min(mcv_k, len(ranked))]
    mcv_values = np.array([v for v, _ in mcv], dtype=np.float64)
    mcv_freqs = np.array([c / nn for _, c in mcv], dtype=np.float64)

    mcv_set = set(v for v, _ in mcv)
    rest = np.sort(np.array([v for v in present.tolist() if v not in mcv_set], dtype=np.float64))
    m = len(rest)
    if m == 0:
        edges = np.empty(0)
        masses = np.empty(0)
        distinct = np.empty(0, dtype=np.int64)
    else:
        b = min(buckets, m)
        pos = [(m * j) // b for j in range(b)] + [m]
        edges = np.array([rest[min(p, m - 1)] for p in pos], dtype=np.float64)
        edges[-1] = rest[-1]
        masses = np.array([(pos[j + 1] - pos[j]) / nn for j in range(b)], dtype=np.float64)
        distinct = np.array(
            [len(np.unique(rest[pos[j]:pos[j + 1]])) for j in range(b)], dtype=np.int64
        )
    return ColumnHistogram(
        mcv_values=mcv_values, mcv_freqs=mcv_freqs,
        bucket_edges=edges, bucket_masses=masses, bucket_distinct=distinct,
        nonnull_fraction=nn / n, remainder_rows=m,
    )


class HistogramModel(EstimatorModel):
    name = "indep_hist"

    def __init__(self, catalog: Catalog, buckets: int, mcv_k: int):
        super().__init__()
        self.row_counts: dict[str, int] = {}
        self.columns: dict[tuple[str, str], ColumnHistogram] = {}
        self.join_distinct: dict[tuple[str, str], int] = {}
        for tname in sorted(catalog.tables):
            table = catalog.table(tname)
            self.row_counts[tname] = table.rows
            for col in table.columns:
                self.columns[(tname, col.name)] = build_column_histogram(
                    table.values(col.name), table.nulls(col.name), buckets, mcv_k
                )
        for edge in catalog.join_graph.edges:
            for t, c in ((edge.table_a, edge.column_a), (edge.table_b, edge.column_b)):
                self.join_distinct[(t, c)] = column_distinct_count(catalog, t, c)

    def table_selectivity(self, subplan: SubPlanQuery, table: str) -> float:
        sel = 1.0
        for p in subplan.predicates_for(table):
            hist = self.columns[(table, p.column)]
            sel *= hist.region_mass(p.region) * hist.nonnull_fraction
        return sel

    def estimate(self, subplan: SubPlanQuery, seed: int = 0) -> float:
        filtered = {
            t: self.row_counts[t] * self.table_selectivity(subplan, t)
            for t in subplan.tables
        }
        if len(subplan.tables) == 1:
            return filtered[subplan.tables[0]]
        return combine_uniformity(subplan, filtered, self.join_distinct)
