"""Exact counting executor and true-cardinality bookkeeping.

Counts are computed by filtering each base table, then joining along a
spanning order with hash-partitioned equi-joins. Intermediate results are
kept as (key-tuple -> multiplicity) groups, so memory tracks the number of
distinct key combinations rather than the logical row count; the logical
count is still checked against a configurable cap after every join, and
exceeding it raises ResourceLimit. The join order is greedy
smallest-intermediate-first; correctness does not depend on it.
"""

from __future__ import annotations

import os
import tempfile
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .catalog import Catalog, TableData
from .errors import ResourceLimit
from .queryir import SubPlanQuery, SubPlanSpace, region_mask

DEFAULT_ROW_CAP = 10**8

TRUE_PROVENANCE = "true"


@dataclass
class CardinalityMap:
    """Sub-plan key -> cardinality, plus where the numbers came from."""

    parent: str
    values: dict[str, float] = field(default_factory=dict)
    provenance: str = TRUE_PROVENANCE

    def __contains__(self, key: str) -> bool:
        return key in self.values

    def __getitem__(self, key: str) -> float:
        return self.values[key]

    def covers(self, space: SubPlanSpace) -> bool:
        return all(e.key in self.values for e in space)

    def is_true(self) -> bool:
        return self.provenance == TRUE_PROVENANCE


def filter_mask(table: TableData, predicates) -> np.ndarray:
    """Conjunction of all predicate regions over one table (nulls never pass)."""
    mask = np.ones(table.rows, dtype=bool)
    for p in predicates:
        mask &= region_mask(p.region, table.values(p.column), table.nulls(p.column))
    return mask


def _group_rows(table: TableData, mask: np.ndarray, cols: tuple[str, ...]) -> Counter:
    """Multiplicity of each key tuple over the filtered rows.

    Rows that are null in any grouped column are dropped: they can never
    match the join the column is grouped for.
    """
    if not cols:
        return Counter({(): int(mask.sum())})
    keep = mask.copy()
    for c in cols:
        keep &= ~table.nulls(c)
    arrays = [table.values(c)[keep] for c in cols]
    groups: Counter = Counter()
    for tup in zip(*(a.tolist() for a in arrays)):
        groups[tup] += 1
    return groups


def _marginal(groups: Counter, idx: int) -> Counter:
    out: Counter = Counter()
    for key, cnt in groups.items():
        out[key[idx]] += cnt
    return out


def execute_count(subplan: SubPlanQuery, catalog: Catalog, row_cap: int = DEFAULT_ROW_CAP) -> int:
    """Exact Card(T, Q) for one sub-plan query."""
    masks = {t: filter_mask(catalog.table(t), subplan.predicates_for(t)) for t in subplan.tables}
    if len(subplan.tables) == 1:
        return int(masks[subplan.tables[0]].sum())

    # columns each table still needs, with one refcount per unprocessed edge
    refcount: Counter = Counter()
    for e in subplan.join_edges:
        refcount[(e.table_a, e.column_a)] += 1
        refcount[(e.table_b, e.column_b)] += 1

    def needed_cols(table: str) -> tuple[str, ...]:
        return tuple(sorted(c for (t, c) in refcount if t == table and refcount[(t, c)] > 0))

    start = min(subplan.tables, key=lambda t: (int(masks[t].sum()), t))
    slots: list[tuple[str, str]] = [(start, c) for c in needed_cols(start)]
    groups = _group_rows(catalog.table(start), masks[start], tuple(c for _, c in slots))
    in_component = {start}
    remaining = list(subplan.join_edges)

    while remaining:
        frontier = [e for e in remaining
                    if (e.table_a in in_component) != (e.table_b in in_component)]
        # evaluate each frontier join and keep the one with the smallest output
        best = None
        for e in sorted(frontier, key=lambda e: e.key()):
            t_in = e.table_a if e.table_a in in_component else e.table_b
            t_out = e.other(t_in)
            c_in, c_out = e.endpoint(t_in), e.endpoint(t_out)
            idx = slots.index((t_in, c_in))

            keep_out = refcount[(t_out, c_out)] > 1  # other edges still use it
            rest_cols = tuple(sorted(
                {c for (t, c) in refcount if t == t_out and refcount[(t, c)] > 0} - {c_out}
            ))
            out_slot_cols = ((c_out,) if keep_out else ()) + rest_cols
            out_groups = _group_rows(
                catalog.table(t_out), masks[t_out], (c_out,) + rest_cols
            )
            by_key: dict = defaultdict(list)
            match_count: Counter = Counter()
            for key, cnt in out_groups.items():
                rest = ((key[0],) if keep_out else ()) + key[1:]
                by_key[key[0]].append((rest, cnt))
                match_count[key[0]] += cnt
            marg_in = _marginal(groups, idx)
            size = sum(cnt * match_count.get(v, 0) for v, cnt in marg_in.items())
            if best is None or size < best[0]:
                best = (size, e, t_in, t_out, c_in, c_out, by_key, out_slot_cols)

        size, edge, t_in, t_out, c_in, c_out, by_key, out_slot_cols = best
        if size > row_cap:
            raise ResourceLimit(
                f"sub-plan {subplan.key}: intermediate result of {size} rows exceeds cap {row_cap}"
            )

        remaining.remove(edge)
        refcount[(t_in, c_in)] -= 1
        refcount[(t_out, c_out)] -= 1

        idx = slots.index((t_in, c_in))
        keep_in = refcount[(t_in, c_in)] > 0
        new_slots = [s for s in slots if s != (t_in, c_in) or keep_in]
        new_slots += [(t_out, c) for c in out_slot_cols]

        new_groups: Counter = Counter()
        for key, cnt in groups.items():
            v = key[idx]
            matches = by_key.get(v)
            if not matches:
                continue
            base = key if keep_in else key[:idx] + key[idx + 1:]
            for rest, out_cnt in matches:
                new_groups[base + rest] += cnt * out_cnt
        groups = new_groups
        slots = new_slots
        in_component.add(t_out)

    return int(sum(groups.values()))


# --- true cardinalities and the sidecar cache ---------------------------------


def true_cardinalities(
    space: SubPlanSpace,
    catalog: Catalog,
    row_cap: int = DEFAULT_ROW_CAP,
    cache_path=None,
) -> CardinalityMap:
    """Exact counts for every entry of a sub-plan space.

    With a cache_path, previously computed entries for this catalog are
    reused, and the (merged) cache file is rewritten atomically.
    """
    cached: dict[tuple[str, str], int] = {}
    fingerprint = catalog.fingerprint()
    if cache_path is not None and Path(cache_path).exists():
        file_fp, rows = read_cache(cache_path)
        if file_fp == fingerprint:
            cached = rows

    values: dict[str, float] = {}
    computed_any = False
    for entry in space:
        hit = cached.get((space.parent, entry.key))
        if hit is not None:
            values[entry.key] = float(hit)
        else:
            try:
                count = execute_count(entry, catalog, row_cap=row_cap)
            except ResourceLimit as exc:
                raise ResourceLimit(f"query {space.parent}: {exc}") from None
            values[entry.key] = float(count)
            cached[(space.parent, entry.key)] = count
            computed_any = True

    if cache_path is not None and computed_any:
        write_cache(cache_path, fingerprint, cached)
    return CardinalityMap(parent=space.parent, values=values, provenance=TRUE_PROVENANCE)


def read_cache(path) -> tuple[str | None, dict[tuple[str, str], int]]:
    """Parse a true-cardinality cache file -> (fingerprint, rows)."""
    fingerprint = None
    rows: dict[tuple[str, str], int] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for tok in line[1:].split():
                    if tok.startswith("fingerprint="):
                        fingerprint = tok.split("=", 1)[1]
                continue
            if line == "query_id,subplan_key,cardinality":
                continue
            qid, key, card = line.split(",")
            rows[(qid, key)] = int(card)
    return fingerprint, rows


def write_cache(path, fingerprint: str, rows: dict[tuple[str, str], int]) -> None:
    """Atomic (write temp + rename) cache write, rows sorted for reproducibility."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(f"# cardbench truecards v1 fingerprint={fingerprint}\n")
            fh.write("query_id,subplan_key,cardinality\n")
            for (qid, key) in sorted(rows):
                fh.write(f"{qid},{key},{int(rows[(qid, key)])}\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
