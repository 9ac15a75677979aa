"""Command-line front end.

Subcommands cover the whole pipeline: ``gen`` (synthesize a dataset and/or
a workload), ``truecards`` (precompute the exact-cardinality cache),
``bench`` (run estimators and score plans), ``explain`` (side-by-side
plans under estimated and true cardinalities), ``inspect`` (catalog
statistics). Exit codes: 0 ok, 2 invariant violation, 3 input error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import bench as bench_mod
from .catalog import load_catalog
from .config import apply_env_overrides, make_configs, parse_config_file
from .errors import CardbenchError, InvariantViolation, ZeroCostPlan
from .estimators import METHODS, build
from .oracle import (
    CardinalityMap,
    execute_count,
    read_cache,
    true_cardinalities,
    write_cache,
)
from .planner import cost_plan, first_divergence, format_plan, optimize
from .queryir import enumerate_subplans, parse_query
from .synth import write_dataset
from .workloadgen import (
    enumerate_templates,
    generate_queries,
    read_workload,
    write_manifest,
    write_workload,
)

EXIT_OK = 0
EXIT_INVARIANT = 2
EXIT_INPUT = 3


def _load(args):
    if not args.schema or not args.data:
        raise CardbenchError("--schema and --data are required for this command")
    return load_catalog(args.schema, args.data)


def _configs(args):
    raw = parse_config_file(args.config) if getattr(args, "config", None) else {}
    est, cost, run = make_configs(raw)
    if getattr(args, "seed", None) is not None:
        run.seed = args.seed
    if getattr(args, "workers", None) is not None:
        run.workers = args.workers
    apply_env_overrides(run)
    return est, cost, run


def cmd_gen(args) -> int:
    if args.synth:
        schema = write_dataset(args.synth, seed=args.seed or 0, scale=args.scale)
        print(f"wrote synthetic dataset to {args.synth}")
        if not args.schema:
            args.schema = schema
            args.data = args.synth
    if not args.out:
        return EXIT_OK
    est, cost, run = _configs(args)
    catalog = _load(args)
    templates = enumerate_templates(catalog, max_tables=args.max_tables,
                                    limit=args.templates, seed=run.seed)
    lo, hi = (float(s) for s in args.selectivity.split(","))
    queries = generate_queries(
        templates, catalog, per_template=args.per_template,
        selectivity_range=(lo, hi), seed=run.seed, row_cap=run.row_cap,
    )
    write_workload(args.out, queries)
    print(f"wrote {len(queries)} queries over {len(templates)} templates to {args.out}")
    if args.manifest:
        write_manifest(args.manifest, queries)
        print(f"wrote manifest to {args.manifest}")
    return EXIT_OK


def cmd_truecards(args) -> int:
    est, cost, run = _configs(args)
    catalog = _load(args)
    queries = read_workload(args.workload, catalog)
    cache_path = Path(args.out)
    known: dict = {}
    if cache_path.exists():
        fp, rows = read_cache(cache_path)
        if fp == catalog.fingerprint():
            known = rows
    computed = 0
    for query in queries:
        space = enumerate_subplans(query, catalog)
        for entry in space:
            if (query.id, entry.key) in known:
                continue
            known[(query.id, entry.key)] = execute_count(entry, catalog,
                                                         row_cap=run.row_cap)
            computed += 1
    if computed or not cache_path.exists():
        write_cache(cache_path, catalog.fingerprint(), known)
    print(f"{len(known)} cached sub-plan cardinalities "
          f"({computed} computed this run) -> {args.out}")
    if args.verify:
        bad = 0
        for query in queries:
            for entry in enumerate_subplans(query, catalog):
                direct = execute_count(entry, catalog, row_cap=run.row_cap)
                if direct != known[(query.id, entry.key)]:
                    bad += 1
                    print(f"MISMATCH {query.id}/{entry.key}: "
                          f"cache {known[(query.id, entry.key)]} vs direct {direct}")
        if bad:
            raise InvariantViolation(f"{bad} cache rows disagree with direct counts")
        print("verify: all cache rows match direct counts")
    return EXIT_OK


def cmd_bench(args) -> int:
    est, cost, run = _configs(args)
    catalog = _load(args)
    queries = read_workload(args.workload, catalog)
    if not queries:
        raise CardbenchError(f"workload {args.workload} contains no statements")
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    for m in methods:
        if m != bench_mod.TRUE_METHOD and m not in METHODS:
            raise CardbenchError(f"unknown method {m!r}; choose from "
                                 f"{(bench_mod.TRUE_METHOD,) + METHODS}")
    cache_rows: dict = {}
    if args.truecards and Path(args.truecards).exists():
        fp, cache_rows = read_cache(args.truecards)
        if fp != catalog.fingerprint():
            cache_rows = {}
    report = bench_mod.run_bench(
        catalog, queries, methods, est_config=est, cost_params=cost,
        seed=run.seed, workers=run.workers, row_cap=run.row_cap,
        cache_rows=cache_rows,
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    Path(f"{out}.json").write_text(report.to_json(), encoding="utf-8")
    Path(f"{out}.csv").write_text("\n".join(report.csv_rows()) + "\n", encoding="utf-8")
    table = report.text_table()
    Path(f"{out}.txt").write_text(table + "\n", encoding="utf-8")
    print(table)
    print(f"report written to {out}.json / {out}.csv / {out}.txt")
    bench_mod.assert_invariants(report)
    return EXIT_OK


def cmd_explain(args) -> int:
    est, cost, run = _configs(args)
    catalog = _load(args)
    if args.query.startswith("@"):
        text = Path(args.query[1:]).read_text(encoding="utf-8").strip()
    else:
        text = args.query
    query = parse_query(text, catalog, query_id="explain")
    space = enumerate_subplans(query, catalog)
    truth = true_cardinalities(space, catalog, row_cap=run.row_cap)

    if args.method == bench_mod.TRUE_METHOD:
        est_map = CardinalityMap(parent=query.id, values=dict(truth.values),
                                 provenance=bench_mod.TRUE_METHOD)
    else:
        model = build(args.method, catalog, est)
        values = {}
        for entry in space:
            seed = bench_mod.derive_seed(run.seed, query.id, args.method, entry.key)
            values[entry.key] = max(model.estimate(entry, seed=seed), 1.0)
        est_map = CardinalityMap(parent=query.id, values=values, provenance=args.method)

    for spec in args.scale_card or []:
        key, factor = spec.split("=")
        if key not in est_map.values:
            raise CardbenchError(f"--scale-card: no sub-plan {key!r} in this query")
        est_map.values[key] = max(est_map.values[key] * float(factor), 1.0)

    est_plan = optimize(query, est_map, cost)
    true_plan = optimize(query, truth, cost)
    true_cost_est_plan = cost_plan(est_plan, truth, cost)
    true_cost_true_plan = cost_plan(true_plan, truth, cost)
    if true_cost_true_plan <= 0:
        raise ZeroCostPlan("every sub-plan of this query is empty; P-Error undefined")

    print(f"=== plan under method {args.method!r} (rows = injected estimates)")
    print(format_plan(est_plan, cost))
    print()
    print("=== plan under true cardinalities")
    print(format_plan(true_plan, cost))
    print()
    divergence = first_divergence(est_plan, true_plan)
    print(f"first divergence: {divergence if divergence else 'none'}")
    print(f"P-Error: {true_cost_est_plan / true_cost_true_plan:.6f}")
    return EXIT_OK


def cmd_inspect(args) -> int:
    catalog = _load(args)
    names = [args.table] if args.table else sorted(catalog.tables)
    for name in names:
        t = catalog.table(name)
        print(f"table {name}: {t.rows} rows")
        for col in t.columns:
            null_frac = col.null_count / t.rows if t.rows else 0.0
            rng = f"[{col.min:g}, {col.max:g}]" if col.min is not None else "[empty]"
            print(f"  {col.name:<20} {col.kind:<12} distinct={col.domain_size:<8} "
                  f"range={rng:<24} nulls={null_frac:.1%}")
    print("join graph:")
    for e in catalog.join_graph.edges:
        print(f"  {e} ({e.key_role})")
    return EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="cardbench",
        description="benchmark harness for cardinality estimation and plan quality",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, workload=False):
        p.add_argument("--schema", help="schema file")
        p.add_argument("--data", help="data directory with one CSV per table")
        if workload:
            p.add_argument("--workload", required=True, help="workload file, one SQL per line")
        p.add_argument("--config", help="key = value config file")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--workers", type=int, default=None)

    g = sub.add_parser("gen", help="generate a synthetic dataset and/or workload")
    common(g)
    g.add_argument("--synth", help="write the synthetic dataset into this directory")
    g.add_argument("--scale", type=int, default=600, help="synthetic scale (users)")
    g.add_argument("--out", help="workload file to write")
    g.add_argument("--manifest", help="manifest CSV to write")
    g.add_argument("--templates", type=int, default=70, help="join template budget")
    g.add_argument("--per-template", type=int, default=2, dest="per_template")
    g.add_argument("--max-tables", type=int, default=8, dest="max_tables")
    g.add_argument("--selectivity", default="0.05,0.9", help="lo,hi target range")

    t = sub.add_parser("truecards", help="precompute true sub-plan cardinalities")
    common(t, workload=True)
    t.add_argument("--out", required=True, help="cache CSV path")
    t.add_argument("--verify", action="store_true",
                   help="recount every sub-plan and compare against the cache")

    b = sub.add_parser("bench", help="run estimators over a workload and score plans")
    common(b, workload=True)
    b.add_argument("--methods", default="true," + ",".join(METHODS))
    b.add_argument("--truecards", help="existing true-cardinality cache")
    b.add_argument("--out", required=True, help="report path prefix")

    e = sub.add_parser("explain", help="estimated vs true plan for one query")
    common(e)
    e.add_argument("--query", required=True, help="SQL text or @file")
    e.add_argument("--method", default="indep_hist")
    e.add_argument("--scale-card", action="append", dest="scale_card",
                   metavar="SUBPLAN=FACTOR",
                   help="multiply one injected estimate, repeatable")

    i = sub.add_parser("inspect", help="print catalog statistics")
    common(i)
    i.add_argument("--table", help="limit to one table")

    return ap


_COMMANDS = {
    "gen": cmd_gen,
    "truecards": cmd_truecards,
    "bench": cmd_bench,
    "explain": cmd_explain,
    "inspect": cmd_inspect,
}


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except CardbenchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
