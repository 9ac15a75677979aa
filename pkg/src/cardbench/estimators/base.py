"""Estimator interface: a built model maps sub-plan queries to cardinalities.

A model is immutable after build; ``estimate`` must be deterministic given
(model, subplan, seed) so benchmark runs reproduce regardless of worker
count. Estimates are finite and non-negative; the benchmark pipeline (not
the estimator) applies the 1-row floor before handing values to the planner.
"""

from __future__ import annotations

import pickle
from dataclasses import dataclass

from ..queryir import SubPlanQuery

_MAGIC = b"CBM1"


@dataclass
class BuildStats:
    build_seconds: float = 0.0
    model_bytes: int = 0


class EstimatorModel:
    name = "abstract"

    def __init__(self):
        self.build_stats = BuildStats()

    def estimate(self, subplan: SubPlanQuery, seed: int = 0) -> float:
        raise NotImplementedError

    # versioned binary serialization; model_bytes is the serialized size.
    # catalog-backed models keep only their derived state in the payload and
    # re-attach the catalog on load.
    def _payload(self) -> dict:
        return {k: v for k, v in self.__dict__.items()
                if k not in ("build_stats", "catalog")}

    def _restore(self, payload: dict, catalog) -> None:
        self.__dict__.update(payload)
        if catalog is not None:
            self.catalog = catalog

    def serialize(self) -> bytes:
        return _MAGIC + pickle.dumps((type(self).name, self._payload()), protocol=4)

    @staticmethod
    def parse_serialized(raw: bytes) -> tuple[str, dict]:
        if raw[:4] != _MAGIC:
            raise ValueError("not a cardbench model file")
        return pickle.loads(raw[4:])

    @staticmethod
    def peek_method(raw: bytes) -> str:
        name, _ = EstimatorModel.parse_serialized(raw)
        return name


def finalize_build(model: EstimatorModel, build_seconds: float) -> EstimatorModel:
    model.build_stats = BuildStats(
        build_seconds=build_seconds,
        model_bytes=len(model.serialize()),
    )
    return model
