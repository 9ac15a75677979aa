"""Never-underestimating cardinality bound from per-key degree caps.

Single-partition variant of sketch-based join bounding: per query the
filtered tables are scanned once for exact max key multiplicities, and the
bound grows along a spanning order as

    bound(S + t) = min(bound(S) * maxdeg_t(key),  |t_f| * cap_S(key))

where cap_S tracks, for every join column already inside S, an upper bound
on the multiplicity of any single key value in the (never materialized)
intermediate result. Joining through an edge multiplies the caps of the
inside columns by the new table's key maxdeg, and a new table's columns
enter with their own maxdeg times the inside key cap. A single table's
bound is its exact filtered count, so the bound is tight there.
"""

from __future__ import annotations

import numpy as np

from ..catalog import Catalog
from ..oracle import filter_mask
from ..queryir import SubPlanQuery
from .base import EstimatorModel
from .joins import spanning_order


def _max_degree(values: np.ndarray, nulls: np.ndarray, mask: np.ndarray) -> float:
    keep = mask & ~nulls
    if not keep.any():
        return 0.0
    _, counts = np.unique(values[keep], return_counts=True)
    return float(counts.max())


class DegreeBoundModel(EstimatorModel):
    name = "pess_bound"

    def __init__(self, catalog: Catalog):
        super().__init__()
        self.catalog = catalog  # degrees are refreshed per query over filtered rows

    def estimate(self, subplan: SubPlanQuery, seed: int = 0) -> float:
        cat = self.catalog
        masks = {t: filter_mask(cat.table(t), subplan.predicates_for(t))
                 for t in subplan.tables}
        counts = {t: float(masks[t].sum()) for t in subplan.tables}

        edge_cols = set()
        for e in subplan.join_edges:
            edge_cols.add((e.table_a, e.column_a))
            edge_cols.add((e.table_b, e.column_b))

        def maxdeg(t: str, c: str) -> float:
            table = cat.table(t)
            return _max_degree(table.values(c), table.nulls(c), masks[t])

        start = subplan.tables[0]
        bound = counts[start]
        caps = {
            (t, c): maxdeg(t, c) for (t, c) in edge_cols if t == start
        }
        for edge, t_in, t_out in spanning_order(subplan):
            c_in, c_out = edge.endpoint(t_in), edge.endpoint(t_out)
            deg_out = maxdeg(t_out, c_out)
            via_inside = bound * deg_out
            via_outside = counts[t_out] * caps[(t_in, c_in)]
            new_bound = min(via_inside, via_outside)
            new_caps = {}
            for key, cap in caps.items():
                new_caps[key] = min(cap * deg_out, new_bound)
            in_cap = caps[(t_in, c_in)]
            for (t, c) in edge_cols:
                if t == t_out:
                    new_caps[(t, c)] = min(maxdeg(t, c) * in_cap, new_bound)
            caps = new_caps
            bound = new_bound
        return bound
