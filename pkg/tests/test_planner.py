import math
import random

import pytest

from cardbench.catalog import build_catalog, build_table
from cardbench.errors import IncompleteCardinalityMap
from cardbench.oracle import CardinalityMap
from cardbench.planner import (
    CostParams,
    JoinNode,
    ScanNode,
    cost_plan,
    first_divergence,
    format_plan,
    local_join_cost,
    optimize,
    ppc,
    scan_cost,
)
from cardbench.queryir import parse_query

from _reference import all_plan_costs


def chain_catalog(n=4):
    tabs = []
    names = [chr(ord("a") + i) for i in range(n)]
    for nm in names:
        tabs.append(build_table(nm, [
            ("j", "categorical", [1, 2]),
            ("k", "categorical", [1, 2]),
            ("x", "continuous", [0.5, 1.5]),
        ]))
    edges = [(names[i], "j", names[i + 1], "k") for i in range(n - 1)]
    return build_catalog(tabs, edges), names


def cards_for(parent, mapping):
    return CardinalityMap(parent=parent, values=dict(mapping), provenance="test")


PARAMS = CostParams()


def test_scan_cost_formula_direct():
    # 1000 rows, 1 predicate: 10*1.0 + 1000*0.01 + 1000*0.0025 = 22.5
    assert scan_cost(1000, 1, PARAMS) == pytest.approx(22.5)


def test_single_table_plan_is_scan():
    cat, _ = chain_catalog(2)
    q = parse_query("SELECT COUNT(*) FROM a WHERE a.x <= 1", cat, query_id="s")
    plan = optimize(q, cards_for("s", {"a": 1.0}), PARAMS)
    assert isinstance(plan, ScanNode)
    assert plan.subplan_key == "a"


def test_two_table_worked_example():
    # the docs/cost_model.md worked example: A=10^6 rows, B=10, join=10
    cat, _ = chain_catalog(2)
    q = parse_query("SELECT COUNT(*) FROM a, b WHERE a.j = b.k", cat, query_id="w")
    cards = cards_for("w", {"a": 1e6, "b": 10.0, "a+b": 10.0})
    plan = optimize(q, cards, PARAMS)
    assert isinstance(plan, JoinNode)
    # hand evaluation: HashJoin(left=a, right=b) local cost
    #   = 10*(0.0025+0.01) + 1e6*0.0025 + 10*0.01 = 2500.225
    # scans: a = 1e6/100 + 1e6*0.01 = 20000, b = 0.1 + 0.1 = 0.2
    assert plan.op == "HashJoin"
    assert plan.left.subplan_key == "a" and plan.right.subplan_key == "b"
    assert cost_plan(plan, cards, PARAMS) == pytest.approx(20000.2 + 2500.225)
    # the alternatives are strictly worse
    assert local_join_cost("NestedLoop", 1e6, 10.0, 10.0, PARAMS) == pytest.approx(25000.1)
    merge = local_join_cost("MergeJoin", 1e6, 10.0, 10.0, PARAMS)
    hand_merge = 2.0 * (1e6 * math.log2(1e6 + 1) + 10 * math.log2(11)) * 0.0025 \
        + (1e6 + 10) * 0.0025 + 10 * 0.01
    assert merge == pytest.approx(hand_merge)
    assert merge > 2500.225


def test_three_table_join_order_sensitivity():
    cat, _ = chain_catalog(3)
    q = parse_query(
        "SELECT COUNT(*) FROM a, b, c WHERE a.j = b.k AND b.j = c.k",
        cat, query_id="o",
    )
    base = {"a": 1000.0, "b": 100.0, "c": 50.0, "a+b+c": 10.0}
    favor_bc = cards_for("o", {**base, "a+b": 10_000.0, "b+c": 20.0})
    plan = optimize(q, favor_bc, PARAMS)
    # (b join c) must be built before a joins in
    joined_first = plan.left if isinstance(plan.left, JoinNode) else plan.right
    assert joined_first.subplan_key == "b+c"

    favor_ab = cards_for("o", {**base, "a+b": 20.0, "b+c": 20_000.0})
    plan2 = optimize(q, favor_ab, PARAMS)
    joined_first2 = plan2.left if isinstance(plan2.left, JoinNode) else plan2.right
    assert joined_first2.subplan_key == "a+b"


def test_optimize_matches_brute_force_random():
    rng = random.Random(5)
    shapes = {
        2: ["SELECT COUNT(*) FROM a, b WHERE a.j = b.k"],
        3: ["SELECT COUNT(*) FROM a, b, c WHERE a.j = b.k AND b.j = c.k"],
        4: ["SELECT COUNT(*) FROM a, b, c, d WHERE a.j = b.k AND b.j = c.k AND c.j = d.k"],
    }
    for trial in range(40):
        n = rng.choice([2, 3, 3, 4])
        cat, names = chain_catalog(n)
        q = parse_query(shapes[n][0], cat, query_id=f"t{trial}")
        from cardbench.queryir import connected_subsets
        values = {}
        for sub in connected_subsets(q.tables, q.join_edges):
            values["+".join(sub)] = float(10 ** rng.uniform(0, 6))
        cards = cards_for(q.id, values)
        plan = optimize(q, cards, PARAMS)
        dp_cost = cost_plan(plan, cards, PARAMS)
        bf_cost, _shape, n_plans = all_plan_costs(q, cards, PARAMS, local_join_cost, scan_cost)
        assert dp_cost == pytest.approx(bf_cost, rel=1e-12), f"trial {trial} ({n_plans} plans)"


def test_ppc_of_truth_is_floor():
    rng = random.Random(9)
    cat, _ = chain_catalog(3)
    q = parse_query(
        "SELECT COUNT(*) FROM a, b, c WHERE a.j = b.k AND b.j = c.k",
        cat, query_id="f",
    )
    from cardbench.queryir import connected_subsets
    keys = ["+".join(s) for s in connected_subsets(q.tables, q.join_edges)]
    for trial in range(25):
        truth = cards_for("f", {k: float(10 ** rng.uniform(0, 5)) for k in keys})
        est = cards_for("f", {k: max(1.0, truth[k] * 10 ** rng.uniform(-2, 2)) for k in keys})
        assert ppc(q, est, truth, PARAMS) >= ppc(q, truth, truth, PARAMS) - 1e-12


def test_cost_locality_root_only_changes_root_terms():
    cat, _ = chain_catalog(2)
    q = parse_query("SELECT COUNT(*) FROM a, b WHERE a.j = b.k", cat, query_id="l")
    cards1 = cards_for("l", {"a": 100.0, "b": 10.0, "a+b": 50.0})
    cards2 = cards_for("l", {"a": 100.0, "b": 10.0, "a+b": 500.0})
    plan = optimize(q, cards1, PARAMS)
    c1 = cost_plan(plan, cards1, PARAMS)
    c2 = cost_plan(plan, cards2, PARAMS)
    # only the out*cpu_tuple_cost term moves
    assert c2 - c1 == pytest.approx((500.0 - 50.0) * PARAMS.cpu_tuple_cost)


def test_plan_invariant_under_table_order_in_text():
    cat, _ = chain_catalog(3)
    q1 = parse_query("SELECT COUNT(*) FROM a, b, c WHERE a.j = b.k AND b.j = c.k",
                     cat, query_id="p")
    q2 = parse_query("SELECT COUNT(*) FROM c, a, b WHERE b.j = c.k AND a.j = b.k",
                     cat, query_id="p")
    assert q1 == q2
    cards = cards_for("p", {"a": 10.0, "b": 20.0, "c": 30.0,
                            "a+b": 40.0, "b+c": 5.0, "a+b+c": 8.0})
    assert format_plan(optimize(q1, cards, PARAMS)) == format_plan(optimize(q2, cards, PARAMS))


def test_incomplete_map_reports_key():
    cat, _ = chain_catalog(2)
    q = parse_query("SELECT COUNT(*) FROM a, b WHERE a.j = b.k", cat, query_id="m")
    with pytest.raises(IncompleteCardinalityMap) as exc:
        optimize(q, cards_for("m", {"a": 1.0, "b": 1.0}), PARAMS)
    assert exc.value.key == "a+b"


def test_deterministic_tie_break():
    cat, _ = chain_catalog(2)
    q = parse_query("SELECT COUNT(*) FROM a, b WHERE a.j = b.k", cat, query_id="t")
    # equal single-table cards make both hash-join orders tie; the tie-break
    # picks the lexicographically smaller (op, left key) pair
    cards = cards_for("t", {"a": 10.0, "b": 10.0, "a+b": 10.0})
    plan = optimize(q, cards, PARAMS)
    assert plan.op == "HashJoin"
    assert plan.left.subplan_key == "a"


# hand check: scan a = 100/100*1.0 + 100*0.01 + 100*1*0.0025 = 2.25
#             scan b = 0.1 + 0.1 = 0.2
#             hash   = 10*0.0125 + 100*0.0025 + 50*0.01 = 0.875 -> total 3.325
GOLDEN_PLAN = """\
HashJoin [a+b] rows=50 cost=3.325000 on a.j = b.k
  SeqScan a [a] rows=100 cost=2.250000 predicates=1
  SeqScan b [b] rows=10 cost=0.200000 predicates=0"""


def test_plan_text_golden():
    cat, _ = chain_catalog(2)
    q = parse_query("SELECT COUNT(*) FROM a, b WHERE a.j = b.k AND a.x <= 2",
                    cat, query_id="g")
    cards = cards_for("g", {"a": 100.0, "b": 10.0, "a+b": 50.0})
    plan = optimize(q, cards, PARAMS)
    assert format_plan(plan) == GOLDEN_PLAN


def test_first_divergence():
    cat, _ = chain_catalog(2)
    q = parse_query("SELECT COUNT(*) FROM a, b WHERE a.j = b.k", cat, query_id="d")
    # 10x10 inputs: HashJoin (0.15) beats NestedLoop (0.25)
    plan = optimize(q, cards_for("d", {"a": 10.0, "b": 10.0, "a+b": 10.0}), PARAMS)
    assert plan.op == "HashJoin"
    assert first_divergence(plan, plan) is None
    # 2x2 inputs: NestedLoop (0.01) beats HashJoin (0.03) -> operator differs
    other = optimize(q, cards_for("d", {"a": 2.0, "b": 2.0, "a+b": 10.0}), PARAMS)
    assert other.op == "NestedLoop"
    assert "HashJoin" in first_divergence(plan, other)
