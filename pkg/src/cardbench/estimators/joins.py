"""Shared multi-table machinery for the single-table estimators.

``spanning_order`` fixes one deterministic traversal of a sub-plan's join
tree (lexicographically smallest table first, then smallest adjacent edge),
so estimates are independent of query text ordering and worker scheduling.

``combine_uniformity`` applies the classic join-uniformity step
|A join B| = |A_f| * |B_f| / max(V_f(A,k), V_f(B,k)) along that order,
where V_f is the base distinct count of the join column capped by the
current filtered row estimate and floored at one.
"""

from __future__ import annotations

from ..catalog import JoinEdge
from ..queryir import SubPlanQuery


def spanning_order(subplan: SubPlanQuery, start: str | None = None) -> list[tuple[JoinEdge, str, str]]:
    """Deterministic (edge, inside_table, outside_table) traversal of the join tree."""
    if len(subplan.tables) <= 1:
        return []
    if start is None:
        start = subplan.tables[0]  # tables are sorted
    inside = {start}
    remaining = list(subplan.join_edges)
    order: list[tuple[JoinEdge, str, str]] = []
    while remaining:
        frontier = [e for e in remaining if (e.table_a in inside) != (e.table_b in inside)]
        edge = min(frontier, key=JoinEdge.key)
        t_in = edge.table_a if edge.table_a in inside else edge.table_b
        t_out = edge.other(t_in)
        order.append((edge, t_in, t_out))
        inside.add(t_out)
        remaining.remove(edge)
    return order


def combine_uniformity(
    subplan: SubPlanQuery,
    filtered_rows: dict[str, float],
    distinct: dict[tuple[str, str], int],
) -> float:
    """Filtered single-table estimates folded into a join-size estimate."""
    rows = filtered_rows[subplan.tables[0]]
    for edge, t_in, t_out in spanning_order(subplan):
        c_in, c_out = edge.endpoint(t_in), edge.endpoint(t_out)
        out_rows = filtered_rows[t_out]
        v_in = max(1.0, min(float(distinct[(t_in, c_in)]), rows))
        v_out = max(1.0, min(float(distinct[(t_out, c_out)]), out_rows))
        rows = rows * out_rows / max(v_in, v_out)
    return rows
