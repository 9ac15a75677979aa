"""Pluggable cardinality estimators.

``build`` constructs one of the five shipped methods over a catalog and
records build time and serialized model size. New estimators plug in by
subclassing EstimatorModel and registering here.
"""

from __future__ import annotations

import time

from ..catalog import Catalog
from ..config import EstimatorConfig
from ..errors import UnsupportedMethod
from .base import BuildStats, EstimatorModel, finalize_build
from .bound import DegreeBoundModel
from .chowliu import ChowLiuModel
from .histogram import HistogramModel
from .sampling import UniSampleModel, WJSampleModel

METHODS = ("indep_hist", "uni_sample", "wj_sample", "pess_bound", "chow_liu")

_CLASSES = {cls.name: cls for cls in
            (HistogramModel, UniSampleModel, WJSampleModel, DegreeBoundModel, ChowLiuModel)}


def load_model(raw: bytes, catalog: Catalog | None = None) -> EstimatorModel:
    """Rebuild a model from its serialized form.

    Sampling and bound models read base tables at estimate time, so they
    need the catalog they were built against.
    """
    name, payload = EstimatorModel.parse_serialized(raw)
    cls = _CLASSES[name]
    model = cls.__new__(cls)
    model.build_stats = BuildStats(model_bytes=len(raw))
    model._restore(payload, catalog)
    return model


def build(method: str, catalog: Catalog, config: EstimatorConfig | None = None) -> EstimatorModel:
    config = config or EstimatorConfig()
    t0 = time.perf_counter()
    if method == "indep_hist":
        model: EstimatorModel = HistogramModel(
            catalog, buckets=config.histogram_buckets, mcv_k=config.mcv_entries
        )
    elif method == "uni_sample":
        model = UniSampleModel(catalog, sample_size=config.sample_size)
    elif method == "wj_sample":
        model = WJSampleModel(catalog, walk_count=config.walk_count,
                              root_override=config.wj_root)
    elif method == "pess_bound":
        model = DegreeBoundModel(catalog)
    elif method == "chow_liu":
        model = ChowLiuModel(catalog, max_bins=config.chow_liu_bins,
                             excluded=config.exclude_columns)
    else:
        raise UnsupportedMethod(f"unknown estimator {method!r}; choose from {METHODS}")
    return finalize_build(model, time.perf_counter() - t0)


__all__ = [
    "METHODS",
    "BuildStats",
    "EstimatorModel",
    "ChowLiuModel",
    "DegreeBoundModel",
    "HistogramModel",
    "UniSampleModel",
    "WJSampleModel",
    "build",
    "load_model",
]
