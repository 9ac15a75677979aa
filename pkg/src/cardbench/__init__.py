"""cardbench: a desk-scale benchmark harness for cardinality estimation.

Pipeline: load a catalog, parse a workload of conjunctive join queries,
enumerate each query's sub-plan space, compute exact true cardinalities,
run estimators over the space, plan with injected cardinalities, and score
plan quality with Q-Error and P-Error.
"""

__version__ = "0.1.0"

from .catalog import Catalog, build_catalog, build_table, load_catalog
from .oracle import CardinalityMap, execute_count, true_cardinalities
from .queryir import Query, SubPlanQuery, SubPlanSpace, enumerate_subplans, parse_query

__all__ = [
    "Catalog",
    "CardinalityMap",
    "Query",
    "SubPlanQuery",
    "SubPlanSpace",
    "build_catalog",
    "build_table",
    "enumerate_subplans",
    "execute_count",
    "load_catalog",
    "parse_query",
    "true_cardinalities",
    "__version__",
]
