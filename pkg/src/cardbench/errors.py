"""Exception hierarchy shared across the package.

Everything raised on purpose derives from CardbenchError so the CLI can
separate input problems (exit code 3) from invariant violations (exit
code 2, see InvariantViolation).
"""


class CardbenchError(Exception):
    """Base class for all errors raised by this package."""


# --- catalog ---------------------------------------------------------------

class SchemaError(CardbenchError):
    """Malformed schema file (reports the offending line number)."""


class MissingTableFile(CardbenchError):
    """A table declared in the schema has no CSV file in the data directory."""


class DuplicateTableName(CardbenchError):
    """The same table is declared twice in a schema file."""


class ColumnTypeMismatch(CardbenchError):
    """A CSV value does not match the declared column kind."""

    def __init__(self, table: str, column: str, row: int, value: str):
        super().__init__(
            f"table {table!r}, column {column!r}, row {row}: "
            f"value {value!r} does not match the declared kind"
        )
        self.table = table
        self.column = column
        self.row = row
        self.value = value


class UnknownTable(CardbenchError):
    pass


class UnknownColumn(CardbenchError):
    pass


# --- queryir ---------------------------------------------------------------

class QuerySyntaxError(CardbenchError):
    """SQL-subset parse failure; carries the character position."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class DisconnectedJoinGraph(CardbenchError):
    """The query's tables are not connected by its join predicates."""


class CyclicJoinGraph(CardbenchError):
    """The query's join predicates form a cycle."""


class NonEquiJoin(CardbenchError):
    """A join predicate uses an operator other than equality."""


class UnknownJoinEdge(CardbenchError):
    """An equi-join predicate does not match any edge of the catalog join graph."""


# --- oracle ----------------------------------------------------------------

class ResourceLimit(CardbenchError):
    """An intermediate join result exceeded the configured row cap."""


# --- estimators ------------------------------------------------------------

class UnsupportedMethod(CardbenchError):
    pass


class InsufficientData(CardbenchError):
    """Model construction needs data the catalog does not have (e.g. empty table)."""


class UnmodeledColumn(CardbenchError):
    """A predicate touches a column that was excluded when the model was built."""


class EmptyRoot(CardbenchError):
    """The designated random-walk root table has no rows at all."""


# --- planner ---------------------------------------------------------------

class IncompleteCardinalityMap(CardbenchError):
    """A sub-plan key required by the planner is missing from the map."""

    def __init__(self, key: str):
        super().__init__(f"cardinality map has no entry for sub-plan {key!r}")
        self.key = key


# --- metrics ---------------------------------------------------------------

class EmptyInput(CardbenchError):
    pass


class ZeroCostPlan(CardbenchError):
    """The true-cardinality plan costs zero (every sub-plan is empty), so
    P-Error's denominator is undefined."""


class DegenerateVariance(CardbenchError):
    """Correlation is undefined because one series has zero variance."""


# --- workloadgen -----------------------------------------------------------

class GenerationExhausted(CardbenchError):
    """Predicate instantiation kept producing empty queries for a template."""

    def __init__(self, template: str, attempts: int):
        super().__init__(
            f"gave up after {attempts} attempts to instantiate template {template!r} "
            f"with non-empty true cardinality"
        )
        self.template = template


# --- cli -------------------------------------------------------------------

class InvariantViolation(CardbenchError):
    """A benchmark-run assertion failed (P-Error floor, bound dominance, ...)."""
