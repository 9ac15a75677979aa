"""Two-phase workload generation over an arbitrary catalog.

Phase one enumerates join templates: connected acyclic subgraphs (spanning
trees of connected table subsets) of the catalog join graph, deduplicated,
seeded-shuffled, and truncated. A shape quota keeps at least one chain,
one star, and one mixed template in the output whenever the graph offers
them, since a blind random draw can easily miss whole shapes.

Phase two instantiates queries per template: each table draws a few filter
columns, a target single-table selectivity from the configured range, and
a region from the column's empirical value distribution. Every emitted
query is verified against the counting oracle to have true cardinality of
at least one row; failures are regenerated a bounded number of times.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass

import numpy as np

from .catalog import Catalog, JoinEdge
from .errors import CardbenchError, GenerationExhausted, ResourceLimit
from .oracle import execute_count
from .queryir import Query, connected_subsets, format_query, make_subplan, parse_query

CHAIN, STAR, MIXED = "chain", "star", "mixed"


@dataclass(frozen=True)
class JoinTemplate:
    tables: tuple[str, ...]
    edges: tuple[JoinEdge, ...]
    shape: str

    @property
    def key(self) -> str:
        return "+".join(self.tables)


def classify_shape(tables: tuple[str, ...], edges: tuple[JoinEdge, ...]) -> str:
    degree = {t: 0 for t in tables}
    for e in edges:
        degree[e.table_a] += 1
        degree[e.table_b] += 1
    top = max(degree.values())
    if top <= 2 or len(tables) == 3:
        return CHAIN  # every tree on up to three tables is a path
    if top == len(tables) - 1:
        return STAR
    return MIXED


def _spanning_trees(tables: tuple[str, ...], edges: list[JoinEdge]) -> list[tuple[JoinEdge, ...]]:
    n = len(tables)
    if len(edges) == n - 1:
        return [tuple(sorted(edges, key=JoinEdge.key))]
    trees = []
    for combo in itertools.combinations(sorted(edges, key=JoinEdge.key), n - 1):
        seen = {tables[0]}
        stack = [tables[0]]
        adj = {t: [] for t in tables}
        for e in combo:
            adj[e.table_a].append(e.table_b)
            adj[e.table_b].append(e.table_a)
        while stack:
            for nxt in adj[stack.pop()]:
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        if len(seen) == n:
            trees.append(tuple(sorted(combo, key=JoinEdge.key)))
    return trees


def enumerate_templates(catalog: Catalog, max_tables: int = 8,
                        limit: int | None = None, seed: int = 0) -> list[JoinTemplate]:
    """Connected acyclic join patterns; cyclic subsets contribute their
    spanning trees only."""
    if max_tables < 2:
        raise ValueError("join templates need at least two tables")
    graph = catalog.join_graph
    pool: list[JoinTemplate] = []
    for subset in connected_subsets(graph.nodes, graph.edges):
        if not 2 <= len(subset) <= max_tables:
            continue
        induced = [e for e in graph.edges
                   if e.table_a in subset and e.table_b in subset]
        for tree in _spanning_trees(subset, induced):
            pool.append(JoinTemplate(tables=subset, edges=tree,
                                     shape=classify_shape(subset, tree)))
    pool.sort(key=lambda t: (t.tables, tuple(e.key() for e in t.edges)))

    rng = np.random.default_rng(seed)
    order = rng.permutation(len(pool))
    shuffled = [pool[i] for i in order]
    if limit is None or limit >= len(shuffled):
        return shuffled

    chosen: list[JoinTemplate] = []
    taken = set()
    for shape in (CHAIN, STAR, MIXED):  # shape quota first, in shuffled order
        for i, t in enumerate(shuffled):
            if t.shape == shape and i not in taken:
                chosen.append(t)
                taken.add(i)
                break
    for i, t in enumerate(shuffled):
        if len(chosen) >= limit:
            break
        if i not in taken:
            chosen.append(t)
            taken.add(i)
    return chosen[:limit]


def _interval_from_quantiles(rng, sorted_values: np.ndarray, target: float) -> tuple[float, float]:
    m = len(sorted_values)
    width = max(1, int(round(target * m)))
    start = int(rng.integers(0, m - width + 1))
    return float(sorted_values[start]), float(sorted_values[start + width - 1])


def _valueset_by_mass(rng, values: np.ndarray, target: float) -> list[float]:
    """Greedy random distinct-value picks until the empirical mass reaches target."""
    uniq, counts = np.unique(values, return_counts=True)
    order = rng.permutation(len(uniq))
    total = counts.sum()
    mass = 0.0
    picked: list[float] = []
    for i in order:
        picked.append(float(uniq[i]))
        mass += counts[i] / total
        if mass >= target:
            break
    return picked


@dataclass
class GeneratedQuery:
    name: str
    sql: str
    query: Query
    template_key: str
    shape: str
    true_cardinality: int


def generate_queries(
    templates: list[JoinTemplate],
    catalog: Catalog,
    per_template: int = 2,
    selectivity_range: tuple[float, float] = (0.05, 0.9),
    seed: int = 0,
    max_predicates_per_table: int = 2,
    max_attempts: int = 50,
    row_cap: int = 10**8,
) -> list[GeneratedQuery]:
    if not 1 <= per_template <= 4:
        raise ValueError("per_template must be between 1 and 4")
    lo_sel, hi_sel = selectivity_range
    if not (0 < lo_sel <= hi_sel <= 1):
        raise ValueError("selectivity range must sit inside (0, 1]")

    rng = np.random.default_rng(seed)
    out: list[GeneratedQuery] = []
    counter = 1
    for template in templates:
        key_cols = {(e.table_a, e.column_a) for e in template.edges}
        key_cols |= {(e.table_b, e.column_b) for e in template.edges}
        for _ in range(per_template):
            for attempt in range(max_attempts):
                conds = [f"{e.table_a}.{e.column_a} = {e.table_b}.{e.column_b}"
                         for e in template.edges]
                for t in template.tables:
                    table = catalog.table(t)
                    candidates = [c.name for c in table.columns
                                  if (t, c.name) not in key_cols
                                  and c.domain_size >= 2]
                    if not candidates:
                        continue
                    n_preds = int(rng.integers(0, min(max_predicates_per_table,
                                                      len(candidates)) + 1))
                    cols = rng.choice(len(candidates), size=n_preds, replace=False)
                    for ci in sorted(cols):
                        col = candidates[int(ci)]
                        target = float(rng.uniform(lo_sel, hi_sel))
                        if target >= 1.0:
                            continue  # an unconstrained attribute, per the canonical form
                        vals = table.values(col)
                        present = np.sort(vals[~table.nulls(col)].astype(np.float64))
                        if len(present) == 0:
                            continue
                        meta = table.column(col)
                        use_set = (meta.kind == "categorical"
                                   and meta.domain_size <= 20
                                   and rng.random() < 0.3)
                        if use_set:
                            picked = _valueset_by_mass(rng, present, target)
                            lits = ", ".join(_fmt(v) for v in sorted(picked))
                            conds.append(f"{t}.{col} IN ({lits})")
                        else:
                            lo, hi = _interval_from_quantiles(rng, present, target)
                            if lo == hi:
                                conds.append(f"{t}.{col} = {_fmt(lo)}")
                            else:
                                conds.append(f"{t}.{col} >= {_fmt(lo)} AND {t}.{col} <= {_fmt(hi)}")
                name = f"q{counter:03d}"
                sql = "SELECT COUNT(*) FROM " + ", ".join(template.tables) \
                    + " WHERE " + " AND ".join(conds)
                query = parse_query(sql, catalog, query_id=name)
                full = make_subplan(query, query.tables)
                try:
                    true = execute_count(full, catalog, row_cap=row_cap)
                except ResourceLimit:
                    continue  # instance beyond desk scale: redraw the predicates
                if true >= 1:
                    canonical = format_query(query, catalog)
                    out.append(GeneratedQuery(
                        name=name, sql=canonical, query=query,
                        template_key=template.key, shape=template.shape,
                        true_cardinality=true,
                    ))
                    counter += 1
                    break
            else:
                raise GenerationExhausted(template.key, max_attempts)
    return out


def _fmt(v: float) -> str:
    if float(v).is_integer() and abs(v) < 2**53:
        return str(int(v))
    return repr(float(v))


# --- workload files -------------------------------------------------------------


def write_workload(path, queries: list[GeneratedQuery]) -> None:
    """One statement per line with a trailing `-- name:<id>` comment."""
    with open(path, "w", encoding="utf-8") as fh:
        for gq in queries:
            fh.write(f"{gq.sql} -- name:{gq.name}\n")


def write_manifest(path, queries: list[GeneratedQuery]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("name,template,shape,true_cardinality\n")
        for gq in queries:
            fh.write(f"{gq.name},{gq.template_key},{gq.shape},{gq.true_cardinality}\n")


_NAME_RE = re.compile(r"[A-Za-z0-9_.\-]+\Z")


def read_workload(path, catalog: Catalog) -> list[Query]:
    """Parse a workload file: one SQL per line, optional trailing name comment,
    `#` lines ignored. Unnamed statements get q<index> names."""
    queries: list[Query] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            name = f"q{len(queries) + 1:03d}"
            if "--" in line:
                line, comment = line.split("--", 1)
                line = line.strip()
                comment = comment.strip()
                if comment.startswith("name:"):
                    name = comment[len("name:"):].strip()
                    if not _NAME_RE.match(name):
                        raise CardbenchError(
                            f"{path}:{lineno}: query name {name!r} may only use "
                            f"letters, digits, and ._-"
                        )
            queries.append(parse_query(line, catalog, query_id=name))
    return queries
