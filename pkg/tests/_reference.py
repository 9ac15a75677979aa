"""Independent reference implementations used only by the test suite.

These are deliberately naive and share no code with the production paths
they check: a nested-loop counting executor, a subset-filter sub-plan
enumerator, exhaustive spanning-tree / physical-plan generators, and small
random instance builders.
"""

from __future__ import annotations

import itertools
import random

import numpy as np

from cardbench.catalog import Catalog, build_catalog, build_table
from cardbench.queryir import Interval, Predicate, SubPlanQuery, region_mask


def nested_loop_count(subplan, catalog: Catalog) -> int:
    """Naive counting: recurse over filtered rows table by table, checking
    every join edge against already-bound rows."""
    tables = list(subplan.tables)
    masks = {}
    for t in tables:
        tab = catalog.table(t)
        m = np.ones(tab.rows, dtype=bool)
        for p in subplan.predicates_for(t):
            m &= region_mask(p.region, tab.values(p.column), tab.nulls(p.column))
        masks[t] = np.flatnonzero(m)

    # order tables so each one after the first joins something already bound
    ordered = [tables[0]]
    rest = set(tables[1:])
    while rest:
        for t in sorted(rest):
            if any(e.touches(t) and e.other(t) in ordered for e in subplan.join_edges):
                ordered.append(t)
                rest.remove(t)
                break
        else:  # disconnected inputs never reach here for valid sub-plans
            ordered.append(sorted(rest)[0])
            rest.remove(ordered[-1])

    def edges_to_bound(t, bound):
        out = []
        for e in subplan.join_edges:
            if e.touches(t) and e.other(t) in bound:
                out.append((e.endpoint(t), e.other(t), e.endpoint(e.other(t))))
        return out

    def recurse(depth, bound_rows):
        if depth == len(ordered):
            return 1
        t = ordered[depth]
        tab = catalog.table(t)
        checks = edges_to_bound(t, bound_rows)
        total = 0
        candidates = masks[t]
        for r in candidates:
            ok = True
            for my_col, other_t, other_col in checks:
                if tab.nulls(my_col)[r]:
                    ok = False
                    break
                other_tab = catalog.table(other_t)
                orow = bound_rows[other_t]
                if other_tab.nulls(other_col)[orow]:
                    ok = False
                    break
                if tab.values(my_col)[r] != other_tab.values(other_col)[orow]:
                    ok = False
                    break
            if ok:
                bound_rows[t] = r
                total += recurse(depth + 1, bound_rows)
                del bound_rows[t]
        return total

    return recurse(0, {})


def brute_force_connected_subsets(tables, edges):
    """All non-empty subsets of 2^n - 1, filtered by BFS connectivity."""
    tables = sorted(tables)
    result = []
    for size in range(1, len(tables) + 1):
        for combo in itertools.combinations(tables, size):
            sub = set(combo)
            adj = {t: set() for t in combo}
            for e in edges:
                if e.table_a in sub and e.table_b in sub:
                    adj[e.table_a].add(e.table_b)
                    adj[e.table_b].add(e.table_a)
            seen = {combo[0]}
            stack = [combo[0]]
            while stack:
                for nxt in adj[stack.pop()]:
                    if nxt not in seen:
                        seen.add(nxt)
                        stack.append(nxt)
            if len(seen) == size:
                result.append(tuple(sorted(combo)))
    return result


def all_plan_costs(query, cards, params, local_join_cost, scan_cost):
    """Minimum total cost over the exhaustively enumerated plan space, plus
    the number of plans visited. Costing is re-derived here from the same
    closed-form formulas, structured bottom-up rather than via the DP."""
    ops = ("HashJoin", "MergeJoin", "NestedLoop")
    edges = query.join_edges

    def connected(sub):
        sub = set(sub)
        first = next(iter(sub))
        seen = {first}
        stack = [first]
        while stack:
            t = stack.pop()
            for e in edges:
                if e.touches(t) and e.table_a in sub and e.table_b in sub:
                    o = e.other(t)
                    if o not in seen:
                        seen.add(o)
                        stack.append(o)
        return len(seen) == len(sub)

    def key_of(sub):
        return "+".join(sorted(sub))

    def plans(sub):
        """Yield (cost, shape) for every plan over the frozen table set."""
        sub = tuple(sorted(sub))
        if len(sub) == 1:
            t = sub[0]
            npreds = len(query.predicates_for(t))
            yield scan_cost(cards[key_of(sub)], npreds, params), t
            return
        out = cards[key_of(sub)]
        full = frozenset(sub)
        for r in range(1, len(sub)):
            for left in itertools.combinations(sub, r):
                right = tuple(sorted(full - set(left)))
                if not connected(left) or not connected(right):
                    continue
                crossing = [e for e in edges
                            if (e.table_a in left) != (e.table_b in left)
                            and (e.table_a in sub and e.table_b in sub)]
                if not crossing:
                    continue
                lrows = cards[key_of(left)]
                rrows = cards[key_of(right)]
                for lcost, lshape in plans(left):
                    for rcost, rshape in plans(right):
                        for op in ops:
                            c = lcost + rcost + local_join_cost(op, lrows, rrows, out, params)
                            yield c, (op, lshape, rshape)

    best = None
    count = 0
    for cost, shape in plans(query.tables):
        count += 1
        if best is None or cost < best[0]:
            best = (cost, shape)
    return best[0], best[1], count


def random_catalog(rng: random.Random, n_tables=3, max_rows=300, max_domain=20,
                   extra_cols=1, null_rate=0.05, shape="chain"):
    """Small random catalog for equivalence and dominance tests.

    shape "chain" joins t_i.j to t_{i+1}.k; shape "star" joins every
    satellite's k to the first table's j, which exercises a shared join
    column driving several edges at once.
    """
    tables = []
    edges = []
    names = [f"t{i}" for i in range(n_tables)]
    for i, name in enumerate(names):
        rows = rng.randint(5, max_rows)
        cols = []
        key_dom = rng.randint(1, max_domain)
        key_vals = [rng.randint(0, key_dom - 1) if rng.random() > null_rate else None
                    for _ in range(rows)]
        cols.append(("k", "categorical", key_vals))
        key2_dom = rng.randint(1, max_domain)
        key2_vals = [rng.randint(0, key2_dom - 1) if rng.random() > null_rate else None
                     for _ in range(rows)]
        cols.append(("j", "categorical", key2_vals))
        for c in range(extra_cols):
            vals = [round(rng.uniform(0, 100), 3) if rng.random() > null_rate else None
                    for _ in range(rows)]
            cols.append((f"x{c}", "continuous", vals))
        tables.append(build_table(name, cols))
    if shape == "star":
        for i in range(1, n_tables):
            edges.append((names[0], "j", names[i], "k", "fkfk"))
    else:
        for i in range(n_tables - 1):
            edges.append((names[i], "j", names[i + 1], "k", "fkfk"))
    return build_catalog(tables, edges)


def random_subplan(rng: random.Random, catalog: Catalog, n_tables=None,
                   predicate_rate=0.7, query_id="rq") -> SubPlanQuery:
    """Random connected sub-plan over a catalog built by random_catalog."""
    names = sorted(catalog.tables)
    if n_tables is None:
        n_tables = rng.randint(1, len(names))
    # grow a random connected subset; works for any join-graph topology
    picked = {rng.choice(names)}
    while len(picked) < n_tables:
        frontier = sorted({e.other(t) for t in picked
                           for e in catalog.join_graph.edges_for(t)} - picked)
        if not frontier:
            break
        picked.add(rng.choice(frontier))
    chosen = sorted(picked)
    edges = tuple(
        e for e in catalog.join_graph.edges
        if e.table_a in chosen and e.table_b in chosen
    )
    preds = []
    for t in chosen:
        tab = catalog.table(t)
        for col in tab.columns:
            if col.name in ("k", "j") or rng.random() > predicate_rate:
                continue
            if col.min is None:
                continue
            lo = rng.uniform(col.min, col.max)
            hi = rng.uniform(lo, col.max)
            preds.append(Predicate(table=t, column=col.name, region=Interval(lo, hi)))
    return SubPlanQuery(parent=query_id, tables=tuple(chosen),
                        join_edges=edges, predicates=tuple(sorted(
                            preds, key=lambda p: (p.table, p.column))))
