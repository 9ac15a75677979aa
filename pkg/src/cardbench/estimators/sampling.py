"""Sampling-based estimators.

UniSampleModel draws a fresh uniform row sample per table per call and
scales the observed selectivity; joins use the same uniformity formula as
the histogram estimator.

WJSampleModel runs index-assisted random walks over the join tree
(Horvitz-Thompson): every walk starts at a uniformly drawn filtered row of
a root table, extends one uniformly drawn matching row per edge, and
contributes the product of the per-hop fanouts when all predicates pass.
The walk root defaults to the member table with the smallest filtered
count; config can pin it. Walks are vectorized per hop, so the per-call
cost is O(edges * walks) array operations.
"""

from __future__ import annotations

import numpy as np

from ..catalog import Catalog, column_distinct_count
from ..errors import EmptyRoot
from ..oracle import filter_mask
from ..queryir import SubPlanQuery
from .base import EstimatorModel
from .joins import combine_uniformity, spanning_order


class UniSampleModel(EstimatorModel):
    name = "uni_sample"

    def __init__(self, catalog: Catalog, sample_size: int):
        super().__init__()
        self.sample_size = sample_size
        self.catalog = catalog  # the model is just a seeded handle to base tables
        self.row_counts = {t: catalog.table(t).rows for t in sorted(catalog.tables)}
        self.join_distinct: dict[tuple[str, str], int] = {}
        for edge in catalog.join_graph.edges:
            for t, c in ((edge.table_a, edge.column_a), (edge.table_b, edge.column_b)):
                self.join_distinct[(t, c)] = column_distinct_count(catalog, t, c)

    def estimate(self, subplan: SubPlanQuery, seed: int = 0) -> float:
        rng = np.random.default_rng(seed)
        filtered: dict[str, float] = {}
        for t in subplan.tables:  # sorted, so the rng stream is reproducible
            table = self.catalog.table(t)
            preds = subplan.predicates_for(t)
            if not preds:
                filtered[t] = float(table.rows)
                continue
            if table.rows == 0:
                filtered[t] = 0.0
                continue
            if table.rows <= self.sample_size:
                idx = np.arange(table.rows)
            else:
                idx = rng.choice(table.rows, size=self.sample_size, replace=False)
            mask = filter_mask(table, preds)
            sel = float(mask[idx].sum()) / len(idx)
            filtered[t] = table.rows * sel
        if len(subplan.tables) == 1:
            return filtered[subplan.tables[0]]
        return combine_uniformity(subplan, filtered, self.join_distinct)


class _KeyIndex:
    """CSR adjacency for one (table, column): key -> row ids, nulls excluded."""

    def __init__(self, values: np.ndarray, nulls: np.ndarray):
        rows = np.flatnonzero(~nulls)
        keys = values[rows].astype(np.float64)
        order = np.argsort(keys, kind="stable")
        self.row_ids = rows[order]
        sorted_keys = keys[order]
        self.unique_keys, starts = np.unique(sorted_keys, return_index=True)
        self.offsets = np.append(starts, len(sorted_keys))

    def lookup(self, probe: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(found mask, fanout, group start) for each probe key."""
        idx = np.searchsorted(self.unique_keys, probe)
        idx_clamped = np.minimum(idx, max(len(self.unique_keys) - 1, 0))
        if len(self.unique_keys) == 0:
            found = np.zeros(len(probe), dtype=bool)
            return found, np.zeros(len(probe), dtype=np.int64), idx_clamped
        found = self.unique_keys[idx_clamped] == probe
        counts = np.where(found, self.offsets[idx_clamped + 1] - self.offsets[idx_clamped], 0)
        starts = np.where(found, self.offsets[idx_clamped], 0)
        return found, counts, starts


class WJSampleModel(EstimatorModel):
    name = "wj_sample"

    def __init__(self, catalog: Catalog, walk_count: int, root_override: str = ""):
        super().__init__()
        self.catalog = catalog
        self.walk_count = walk_count
        self.root_override = root_override
        self.indexes: dict[tuple[str, str], _KeyIndex] = {}
        for edge in sorted(catalog.join_graph.edges, key=lambda e: e.key()):
            for t, c in ((edge.table_a, edge.column_a), (edge.table_b, edge.column_b)):
                if (t, c) not in self.indexes:
                    table = catalog.table(t)
                    self.indexes[(t, c)] = _KeyIndex(table.values(c), table.nulls(c))

    def estimate(self, subplan: SubPlanQuery, seed: int = 0, walks: int | None = None) -> float:
        walks = self.walk_count if walks is None else walks
        masks = {t: filter_mask(self.catalog.table(t), subplan.predicates_for(t))
                 for t in subplan.tables}
        counts = {t: int(masks[t].sum()) for t in subplan.tables}

        if self.root_override and self.root_override in subplan.tables:
            root = self.root_override
        else:
            root = min(subplan.tables, key=lambda t: (counts[t], t))
        if self.catalog.table(root).rows == 0:
            raise EmptyRoot(f"walk root table {root!r} has no rows")
        if counts[root] == 0:
            return 0.0
        if len(subplan.tables) == 1:
            return float(counts[root])

        # walk the join tree outward from the root in a fixed order
        order = spanning_order(subplan, start=root)
        rng = np.random.default_rng(seed)
        root_rows = np.flatnonzero(masks[root])
        current = {root: root_rows[rng.integers(0, len(root_rows), size=walks)]}
        weights = np.ones(walks, dtype=np.float64)
        alive = np.ones(walks, dtype=bool)
        for edge, t_in, t_out in order:
            c_in, c_out = edge.endpoint(t_in), edge.endpoint(t_out)
            in_table = self.catalog.table(t_in)
            rows_in = current[t_in]
            probe = in_table.values(c_in)[rows_in].astype(np.float64)
            probe_null = in_table.nulls(c_in)[rows_in]
            index = self.indexes[(t_out, c_out)]
            found, fanout, starts = index.lookup(probe)
            found &= ~probe_null & alive
            weights = np.where(found, weights * fanout, 0.0)
            alive &= found
            pick = starts + (rng.random(walks) * np.maximum(fanout, 1)).astype(np.int64)
            if len(index.row_ids):
                picked = index.row_ids[np.minimum(pick, len(index.row_ids) - 1)]
            else:
                picked = np.zeros(walks, dtype=np.int64)
            rows_out = np.where(found, picked, 0)
            if self.catalog.table(t_out).rows:
                passes = masks[t_out][rows_out] & alive
            else:
                passes = np.zeros(walks, dtype=bool)
            weights = np.where(passes, weights, 0.0)
            alive &= passes
            current[t_out] = rows_out
            if not alive.any():
                return 0.0
        return float(counts[root]) * float(weights.mean())
