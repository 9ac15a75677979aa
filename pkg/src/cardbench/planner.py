"""Cost-based plan search over injected cardinalities.

Selinger-style dynamic programming over the connected subsets of a query's
join tree, bushy shapes included, with three join operators (hash, merge,
nested loop) and sequential scans. Every node's row count is read from the
supplied cardinality map and never re-derived, so the planner is a pure
function of (query, map, cost constants). Ties break on the
lexicographically smallest (operator name, left sub-plan key) pair.

``cost_plan`` recosts a fixed plan under a different map, which is what
turns an estimated plan plus true cardinalities into the paper-style
"true cost of the chosen plan" quantity exposed as ``ppc``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

from .catalog import JoinEdge
from .errors import IncompleteCardinalityMap
from .oracle import CardinalityMap
from .queryir import Predicate, Query, connected_subsets

JOIN_OPS = ("HashJoin", "MergeJoin", "NestedLoop")


@dataclass(frozen=True)
class CostParams:
    seq_page_cost: float = 1.0
    cpu_tuple_cost: float = 0.01
    cpu_operator_cost: float = 0.0025
    sort_factor: float = 2.0
    rows_per_page: int = 100

    def __post_init__(self):
        for name in ("seq_page_cost", "cpu_tuple_cost", "cpu_operator_cost",
                     "sort_factor", "rows_per_page"):
            if getattr(self, name) <= 0:
                raise ValueError(f"cost parameter {name} must be strictly positive")


@dataclass(frozen=True)
class ScanNode:
    table: str
    predicates: tuple[Predicate, ...]
    subplan_key: str
    rows_used: float


@dataclass(frozen=True)
class JoinNode:
    op: str
    left: "PhysicalPlan"
    right: "PhysicalPlan"
    edge: JoinEdge
    subplan_key: str
    rows_used: float


PhysicalPlan = Union[ScanNode, JoinNode]


def _rows(cards: CardinalityMap, key: str) -> float:
    try:
        return cards[key]
    except KeyError:
        raise IncompleteCardinalityMap(key) from None


def scan_cost(rows: float, n_predicates: int, p: CostParams) -> float:
    return (rows / p.rows_per_page) * p.seq_page_cost \
        + rows * p.cpu_tuple_cost \
        + rows * n_predicates * p.cpu_operator_cost


def local_join_cost(op: str, left_rows: float, right_rows: float,
                    out_rows: float, p: CostParams) -> float:
    """Cost added by one join node on top of its children."""
    if op == "HashJoin":
        return right_rows * (p.cpu_operator_cost + p.cpu_tuple_cost) \
            + left_rows * p.cpu_operator_cost \
            + out_rows * p.cpu_tuple_cost
    if op == "MergeJoin":
        sort = p.sort_factor * (
            left_rows * math.log2(1.0 + left_rows)
            + right_rows * math.log2(1.0 + right_rows)
        ) * p.cpu_operator_cost
        return sort + (left_rows + right_rows) * p.cpu_operator_cost \
            + out_rows * p.cpu_tuple_cost
    if op == "NestedLoop":
        return left_rows * right_rows * p.cpu_operator_cost \
            + out_rows * p.cpu_tuple_cost
    raise ValueError(f"unknown join operator {op!r}")


def optimize(query: Query, cards: CardinalityMap, params: CostParams) -> PhysicalPlan:
    """Minimum-cost bushy join tree under the supplied cardinalities."""
    subsets = connected_subsets(query.tables, query.join_edges)
    best: dict[frozenset, tuple[float, PhysicalPlan]] = {}

    for sub in subsets:
        key = "+".join(sub)
        out_rows = _rows(cards, key)
        if len(sub) == 1:
            t = sub[0]
            preds = query.predicates_for(t)
            node = ScanNode(table=t, predicates=preds, subplan_key=key, rows_used=out_rows)
            best[frozenset(sub)] = (scan_cost(out_rows, len(preds), params), node)
            continue

        fset = frozenset(sub)
        winner: tuple[float, str, str] | None = None
        winner_node: JoinNode | None = None
        members = list(sub)
        # every ordered split into two connected halves; the query graph is a
        # tree, so exactly one edge crosses any such split
        for bits in range(1, (1 << len(members)) - 1):
            left_set = frozenset(members[i] for i in range(len(members)) if bits & (1 << i))
            right_set = fset - left_set
            if left_set not in best or right_set not in best:
                continue
            crossing = [e for e in query.join_edges
                        if e.table_a in fset and e.table_b in fset
                        and (e.table_a in left_set) != (e.table_b in left_set)]
            if not crossing:
                continue
            edge = crossing[0]
            lcost, lplan = best[left_set]
            rcost, rplan = best[right_set]
            lrows = _rows(cards, "+".join(sorted(left_set)))
            rrows = _rows(cards, "+".join(sorted(right_set)))
            for op in JOIN_OPS:
                total = lcost + rcost + local_join_cost(op, lrows, rrows, out_rows, params)
                rank = (total, op, "+".join(sorted(left_set)))
                if winner is None or rank < winner:
                    winner = rank
                    winner_node = JoinNode(op=op, left=lplan, right=rplan, edge=edge,
                                           subplan_key=key, rows_used=out_rows)
        best[fset] = (winner[0], winner_node)

    return best[frozenset(query.tables)][1]


def cost_plan(plan: PhysicalPlan, cards: CardinalityMap, params: CostParams) -> float:
    """Total cost of a fixed plan with every row count read from `cards`."""
    if isinstance(plan, ScanNode):
        return scan_cost(_rows(cards, plan.subplan_key), len(plan.predicates), params)
    lcost = cost_plan(plan.left, cards, params)
    rcost = cost_plan(plan.right, cards, params)
    lrows = _rows(cards, plan.left.subplan_key)
    rrows = _rows(cards, plan.right.subplan_key)
    out = _rows(cards, plan.subplan_key)
    return lcost + rcost + local_join_cost(plan.op, lrows, rrows, out, params)


def ppc(query: Query, estimated: CardinalityMap, truth: CardinalityMap,
        params: CostParams) -> float:
    """True-map cost of the plan the optimizer picks under the estimated map."""
    return cost_plan(optimize(query, estimated, params), truth, params)


# --- pretty printing (format is frozen; golden tests rely on it) -------------


def format_plan(plan: PhysicalPlan, params: CostParams | None = None) -> str:
    """Indented EXPLAIN-like text using each node's rows-used annotation."""
    params = params or CostParams()

    def annotated_cost(node: PhysicalPlan) -> float:
        if isinstance(node, ScanNode):
            return scan_cost(node.rows_used, len(node.predicates), params)
        return cost_plan_with_annotations(node)

    def cost_plan_with_annotations(node: JoinNode) -> float:
        return annotated_cost(node.left) + annotated_cost(node.right) + local_join_cost(
            node.op, node.left.rows_used, node.right.rows_used, node.rows_used, params
        )

    lines: list[str] = []

    def walk(node: PhysicalPlan, depth: int):
        pad = "  " * depth
        if isinstance(node, ScanNode):
            lines.append(
                f"{pad}SeqScan {node.table} [{node.subplan_key}] "
                f"rows={node.rows_used:.6g} cost={annotated_cost(node):.6f} "
                f"predicates={len(node.predicates)}"
            )
        else:
            lines.append(
                f"{pad}{node.op} [{node.subplan_key}] "
                f"rows={node.rows_used:.6g} cost={annotated_cost(node):.6f} "
                f"on {node.edge}"
            )
            walk(node.left, depth + 1)
            walk(node.right, depth + 1)

    walk(plan, 0)
    return "\n".join(lines)


def first_divergence(a: PhysicalPlan, b: PhysicalPlan) -> str | None:
    """Preorder description of the first node where two plans differ, or None."""
    def node_sig(n: PhysicalPlan):
        if isinstance(n, ScanNode):
            return ("SeqScan", n.subplan_key)
        return (n.op, n.subplan_key)

    def walk(x: PhysicalPlan, y: PhysicalPlan):
        if node_sig(x) != node_sig(y):
            sx, sy = node_sig(x), node_sig(y)
            return f"{sx[0]} [{sx[1]}] vs {sy[0]} [{sy[1]}]"
        if isinstance(x, ScanNode) or isinstance(y, ScanNode):
            return None
        return walk(x.left, y.left) or walk(x.right, y.right)

    return walk(a, b)
