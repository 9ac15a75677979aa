"""Run configuration: estimator parameters, cost constants, runtime knobs.

The CLI reads a flat ``key = value`` config file (``#`` comments allowed)
and applies CARDBENCH_SEED / CARDBENCH_WORKERS environment overrides on
top. Unknown keys are rejected so typos surface as input errors.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, fields
from pathlib import Path

from .errors import CardbenchError
from .planner import CostParams


@dataclass
class EstimatorConfig:
    histogram_buckets: int = 100
    mcv_entries: int = 10
    sample_size: int = 10_000
    walk_count: int = 10_000
    chow_liu_bins: int = 64
    wj_root: str = ""                      # override for the walk root table
    exclude_columns: frozenset[str] = frozenset()  # "table.column" left unmodeled


@dataclass
class RunSettings:
    seed: int = 0
    workers: int = 1
    row_cap: int = 10**8


_INT_KEYS = {
    "histogram_buckets", "mcv_entries", "sample_size", "walk_count",
    "chow_liu_bins", "seed", "workers", "row_cap", "rows_per_page",
}
_FLOAT_KEYS = {"seq_page_cost", "cpu_tuple_cost", "cpu_operator_cost", "sort_factor"}
_STR_KEYS = {"wj_root"}
_LIST_KEYS = {"exclude_columns"}


def parse_config_file(path) -> dict:
    raw: dict[str, object] = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CardbenchError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in _INT_KEYS:
            raw[key] = int(value)
        elif key in _FLOAT_KEYS:
            raw[key] = float(value)
        elif key in _STR_KEYS:
            raw[key] = value
        elif key in _LIST_KEYS:
            raw[key] = frozenset(v.strip() for v in value.split(",") if v.strip())
        else:
            raise CardbenchError(f"{path}:{lineno}: unknown config key {key!r}")
    return raw


def make_configs(raw: dict | None) -> tuple[EstimatorConfig, CostParams, RunSettings]:
    raw = dict(raw or {})
    est = EstimatorConfig()
    for f in fields(EstimatorConfig):
        if f.name in raw:
            setattr(est, f.name, raw.pop(f.name))
    cost_kwargs = {}
    for f in fields(CostParams):
        if f.name in raw:
            cost_kwargs[f.name] = raw.pop(f.name)
    cost = CostParams(**cost_kwargs)
    run = RunSettings()
    for f in fields(RunSettings):
        if f.name in raw:
            setattr(run, f.name, raw.pop(f.name))
    if raw:
        raise CardbenchError(f"unknown config keys: {sorted(raw)}")
    return est, cost, run


def apply_env_overrides(run: RunSettings) -> RunSettings:
    seed = os.environ.get("CARDBENCH_SEED")
    workers = os.environ.get("CARDBENCH_WORKERS")
    if seed is not None:
        run.seed = int(seed)
    if workers is not None:
        run.workers = int(workers)
    return run
