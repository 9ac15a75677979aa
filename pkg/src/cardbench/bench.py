"""End-to-end benchmark pipeline.

Per query: enumerate the sub-plan space, obtain true cardinalities (cache
aware), run each estimator over every sub-plan (floored at one row), plan
under the estimated map, and score Q-Errors and the P-Error. Aggregates
are recomputable from the per-query rows.

Determinism: all estimator randomness derives from
blake2(global seed, query id, method, sub-plan key), so results are
independent of worker count and scheduling. The JSON report contains only
deterministic fields; wall-clock measurements (build seconds, estimate
latency) go to the CSV and text views, which is what lets two runs with
different worker counts produce byte-identical JSON.

The special method name "true" injects the true-cardinality map itself.
"""

from __future__ import annotations

import hashlib
import json
import multiprocessing
import time
from dataclasses import dataclass, field

from .catalog import Catalog
from .config import EstimatorConfig
from .errors import InvariantViolation, ZeroCostPlan
from .estimators import build
from .estimators.base import BuildStats, EstimatorModel
from .metrics import percentile, q_error
from .oracle import CardinalityMap, true_cardinalities
from .planner import CostParams, cost_plan, format_plan, optimize
from .queryir import Query, enumerate_subplans

TRUE_METHOD = "true"
P_ERROR_TOLERANCE = 1e-12


def derive_seed(global_seed: int, query_id: str, method: str, subplan_key: str) -> int:
    payload = f"cardbench:{global_seed}:{query_id}:{method}:{subplan_key}".encode()
    return int.from_bytes(hashlib.blake2b(payload, digest_size=8).digest(), "big")


@dataclass
class MethodQueryResult:
    query_id: str
    method: str
    estimates: dict[str, float]
    q_errors: dict[str, float]
    zero_truth: list[str]
    p_error: float
    plan_text: str
    estimate_seconds: float


@dataclass
class QueryReport:
    query_id: str
    tables: tuple[str, ...]
    n_subplans: int
    true_cost: float
    true_cards: dict[str, float]
    methods: dict[str, MethodQueryResult] = field(default_factory=dict)


@dataclass
class BenchmarkReport:
    seed: int
    methods: list[str]
    queries: list[QueryReport]
    build_stats: dict[str, BuildStats]

    def aggregates(self) -> dict[str, dict]:
        out: dict[str, dict] = {}
        for method in self.methods:
            q_errs = [v for qr in self.queries
                      for v in qr.methods[method].q_errors.values()]
            p_errs = [qr.methods[method].p_error for qr in self.queries]
            stats = self.build_stats.get(method, BuildStats())
            out[method] = {
                "q_error": {p: percentile(q_errs, int(p[1:])) for p in ("p50", "p90", "p99")},
                "p_error": {p: percentile(p_errs, int(p[1:])) for p in ("p50", "p90", "p99")},
                "model_bytes": stats.model_bytes,
            }
        return out

    def timing(self) -> dict[str, dict]:
        out: dict[str, dict] = {}
        for method in self.methods:
            latencies = [qr.methods[method].estimate_seconds for qr in self.queries]
            stats = self.build_stats.get(method, BuildStats())
            out[method] = {
                "build_seconds": stats.build_seconds,
                "mean_estimate_seconds": sum(latencies) / len(latencies) if latencies else 0.0,
            }
        return out

    def to_json(self) -> str:
        doc = {
            "schema_version": 1,
            "seed": self.seed,
            "methods": self.methods,
            "queries": [
                {
                    "id": qr.query_id,
                    "tables": list(qr.tables),
                    "n_subplans": qr.n_subplans,
                    "true_cost": qr.true_cost,
                    "true_cards": qr.true_cards,
                    "methods": {
                        m: {
                            "estimates": r.estimates,
                            "q_errors": r.q_errors,
                            "zero_truth": r.zero_truth,
                            "p_error": r.p_error,
                            "plan": r.plan_text,
                        }
                        for m, r in sorted(qr.methods.items())
                    },
                }
                for qr in self.queries
            ],
            "aggregates": self.aggregates(),
        }
        return json.dumps(doc, sort_keys=True, indent=2) + "\n"

    def csv_rows(self) -> list[str]:
        lines = ["query_id,method,n_subplans,p_error,q_error_median,q_error_max,estimate_seconds"]
        for qr in self.queries:
            for m in self.methods:
                r = qr.methods[m]
                qvals = sorted(r.q_errors.values())
                med = percentile(qvals, 50)
                lines.append(
                    f"{qr.query_id},{m},{qr.n_subplans},{r.p_error:.6g},"
                    f"{med:.6g},{qvals[-1]:.6g},{r.estimate_seconds:.6f}"
                )
        return lines

    def text_table(self) -> str:
        agg = self.aggregates()
        timing = self.timing()
        header = (f"{'method':<12} {'q50':>10} {'q90':>10} {'q99':>10} "
                  f"{'p50':>8} {'p90':>8} {'p99':>8} {'bytes':>10} "
                  f"{'build_s':>8} {'est_s':>8}")
        lines = [header, "-" * len(header)]
        for m in self.methods:
            a, t = agg[m], timing[m]
            lines.append(
                f"{m:<12} "
                f"{a['q_error']['p50']:>10.4g} {a['q_error']['p90']:>10.4g} "
                f"{a['q_error']['p99']:>10.4g} "
                f"{a['p_error']['p50']:>8.4g} {a['p_error']['p90']:>8.4g} "
                f"{a['p_error']['p99']:>8.4g} "
                f"{a['model_bytes']:>10d} "
                f"{t['build_seconds']:>8.3f} {t['mean_estimate_seconds']:>8.4f}"
            )
        return "\n".join(lines)


def evaluate_method_on_query(
    query: Query,
    space,
    truth: CardinalityMap,
    model: EstimatorModel | None,
    method: str,
    cost_params: CostParams,
    global_seed: int,
) -> MethodQueryResult:
    estimates: dict[str, float] = {}
    zero_truth: list[str] = []
    elapsed = 0.0
    if method == TRUE_METHOD:
        est_map = truth
        estimates = {k: max(v, 1.0) for k, v in truth.values.items()}
    else:
        for entry in space:
            seed = derive_seed(global_seed, query.id, method, entry.key)
            t0 = time.perf_counter()
            raw = model.estimate(entry, seed=seed)
            elapsed += time.perf_counter() - t0
            estimates[entry.key] = max(float(raw), 1.0)  # planner floor
        est_map = CardinalityMap(parent=query.id, values=estimates, provenance=method)

    q_errors: dict[str, float] = {}
    for key, true_value in truth.values.items():
        if true_value < 1.0:
            zero_truth.append(key)
        q_errors[key] = q_error(estimates[key], true_value)

    plan = optimize(query, est_map, cost_params)
    true_cost_of_plan = cost_plan(plan, truth, cost_params)
    denom = cost_plan(optimize(query, truth, cost_params), truth, cost_params)
    if denom <= 0:
        raise ZeroCostPlan(
            f"query {query.id!r}: every sub-plan is empty, P-Error undefined"
        )
    return MethodQueryResult(
        query_id=query.id,
        method=method,
        estimates=estimates,
        q_errors=q_errors,
        zero_truth=sorted(zero_truth),
        p_error=true_cost_of_plan / denom,
        plan_text=format_plan(plan, cost_params),
        estimate_seconds=elapsed,
    )


def process_query(
    query: Query,
    catalog: Catalog,
    methods: list[str],
    models: dict[str, EstimatorModel],
    cost_params: CostParams,
    global_seed: int,
    row_cap: int,
    cache_rows: dict[tuple[str, str], int] | None = None,
) -> QueryReport:
    space = enumerate_subplans(query, catalog)
    if cache_rows:
        hits = {e.key: float(cache_rows[(query.id, e.key)])
                for e in space if (query.id, e.key) in cache_rows}
    else:
        hits = {}
    if len(hits) == len(space):
        truth = CardinalityMap(parent=query.id, values=hits)
    else:
        truth = true_cardinalities(space, catalog, row_cap=row_cap)
    denom_plan = optimize(query, truth, cost_params)
    report = QueryReport(
        query_id=query.id,
        tables=query.tables,
        n_subplans=len(space),
        true_cost=cost_plan(denom_plan, truth, cost_params),
        true_cards=dict(truth.values),
    )
    for method in methods:
        model = models.get(method)
        report.methods[method] = evaluate_method_on_query(
            query, space, truth, model, method, cost_params, global_seed
        )
    return report


# --- worker pool -----------------------------------------------------------------

_POOL_STATE: dict = {}


def _pool_task(query: Query) -> QueryReport:
    s = _POOL_STATE
    return process_query(query, s["catalog"], s["methods"], s["models"],
                         s["cost_params"], s["seed"], s["row_cap"], s["cache_rows"])


def run_bench(
    catalog: Catalog,
    queries: list[Query],
    methods: list[str],
    est_config: EstimatorConfig | None = None,
    cost_params: CostParams | None = None,
    seed: int = 0,
    workers: int = 1,
    row_cap: int = 10**8,
    cache_rows: dict[tuple[str, str], int] | None = None,
) -> BenchmarkReport:
    est_config = est_config or EstimatorConfig()
    cost_params = cost_params or CostParams()
    models = {m: build(m, catalog, est_config) for m in methods if m != TRUE_METHOD}
    build_stats = {m: models[m].build_stats for m in models}
    if TRUE_METHOD in methods:
        build_stats[TRUE_METHOD] = BuildStats()

    use_pool = workers > 1 and len(queries) > 1
    if use_pool:
        try:
            ctx = multiprocessing.get_context("fork")
        except ValueError:  # no fork on this platform: results are identical anyway
            use_pool = False
    if use_pool:
        _POOL_STATE.update(
            catalog=catalog, methods=methods, models=models, cost_params=cost_params,
            seed=seed, row_cap=row_cap, cache_rows=cache_rows,
        )
        with ctx.Pool(workers) as pool:
            reports = pool.map(_pool_task, queries)
        _POOL_STATE.clear()
    else:
        reports = [
            process_query(q, catalog, methods, models, cost_params, seed, row_cap, cache_rows)
            for q in queries
        ]
    reports.sort(key=lambda r: r.query_id)
    return BenchmarkReport(seed=seed, methods=list(methods), queries=reports,
                           build_stats=build_stats)


def check_invariants(report: BenchmarkReport) -> list[str]:
    """P-Error floor and bound dominance; violations fail the run (exit 2)."""
    problems: list[str] = []
    for qr in report.queries:
        for method, r in qr.methods.items():
            if r.p_error < 1.0 - P_ERROR_TOLERANCE:
                problems.append(
                    f"{qr.query_id}/{method}: P-Error {r.p_error} below 1"
                )
            if method == "pess_bound":
                for key, true_value in qr.true_cards.items():
                    if r.estimates[key] < true_value:
                        problems.append(
                            f"{qr.query_id}/pess_bound: {key} estimate "
                            f"{r.estimates[key]} under true {true_value}"
                        )
    return problems


def assert_invariants(report: BenchmarkReport) -> None:
    problems = check_invariants(report)
    if problems:
        raise InvariantViolation("; ".join(problems[:5]) +
                                 (f" (+{len(problems) - 5} more)" if len(problems) > 5 else ""))
