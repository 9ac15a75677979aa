"""In-memory columnar catalog: schema, join graph, table data, base statistics.

A catalog is immutable after load and safe for concurrent readers. Column
data lives in per-column numpy arrays: categorical columns as dense int64
codes with a persisted dictionary, continuous columns as float64. Nulls are
tracked in a separate boolean mask per column (True marks a null entry);
they never satisfy a predicate and never match a join key.

Schema file format (UTF-8, ``#`` starts a comment):

    table <name>
      column <name> <categorical|continuous>
      ...
    join <t1>.<c1> = <t2>.<c2> [pkfk|fkfk]

Data files are RFC-4180 CSV, one ``<data_dir>/<table>.csv`` per table with a
header row; an empty field is a null.
"""

from __future__ import annotations

import csv
import hashlib
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    ColumnTypeMismatch,
    DuplicateTableName,
    MissingTableFile,
    SchemaError,
    UnknownColumn,
    UnknownTable,
)

CATEGORICAL = "categorical"
CONTINUOUS = "continuous"

_INT64_MIN = -(2**63)
_INT64_MAX = 2**63 - 1


@dataclass
class ColumnMeta:
    """Statistics and encoding of one column.

    For categorical columns ``dictionary`` maps the raw CSV token to its
    integer code. When every raw value parses as an integer the code is the
    integer itself, so range predicates keep their natural meaning;
    otherwise codes are assigned densely in sorted token order.
    """

    name: str
    kind: str
    domain_size: int = 0
    min: float | None = None
    max: float | None = None
    null_count: int = 0
    dictionary: dict[str, int] | None = None


@dataclass
class TableData:
    name: str
    columns: list[ColumnMeta]
    rows: int
    column_store: dict[str, np.ndarray]
    null_mask: dict[str, np.ndarray]

    def column(self, name: str) -> ColumnMeta:
        for col in self.columns:
            if col.name == name:
                return col
        raise UnknownColumn(f"table {self.name!r} has no column {name!r}")

    def values(self, name: str) -> np.ndarray:
        if name not in self.column_store:
            raise UnknownColumn(f"table {self.name!r} has no column {name!r}")
        return self.column_store[name]

    def nulls(self, name: str) -> np.ndarray:
        if name not in self.null_mask:
            raise UnknownColumn(f"table {self.name!r} has no column {name!r}")
        return self.null_mask[name]


@dataclass(frozen=True)
class JoinEdge:
    """An undirected equi-join edge, normalized so (table_a, column_a) is the
    lexicographically smaller endpoint."""

    table_a: str
    column_a: str
    table_b: str
    column_b: str
    key_role: str = "fkfk"

    def __post_init__(self):
        if (self.table_b, self.column_b) < (self.table_a, self.column_a):
            ta, ca = self.table_a, self.column_a
            object.__setattr__(self, "table_a", self.table_b)
            object.__setattr__(self, "column_a", self.column_b)
            object.__setattr__(self, "table_b", ta)
            object.__setattr__(self, "column_b", ca)

    def key(self) -> tuple[str, str, str, str]:
        return (self.table_a, self.column_a, self.table_b, self.column_b)

    def touches(self, table: str) -> bool:
        return table in (self.table_a, self.table_b)

    def endpoint(self, table: str) -> str:
        """Column of this edge on `table`."""
        if table == self.table_a:
            return self.column_a
        if table == self.table_b:
            return self.column_b
        raise ValueError(f"edge {self} does not touch table {table!r}")

    def other(self, table: str) -> str:
        if table == self.table_a:
            return self.table_b
        if table == self.table_b:
            return self.table_a
        raise ValueError(f"edge {self} does not touch table {table!r}")

    def __str__(self) -> str:
        return f"{self.table_a}.{self.column_a} = {self.table_b}.{self.column_b}"


def _normalize_endpoints(t1, c1, t2, c2):
    if (t2, c2) < (t1, c1):
        return t2, c2, t1, c1
    return t1, c1, t2, c2


@dataclass
class JoinGraph:
    nodes: list[str]
    edges: list[JoinEdge]

    def edges_for(self, table: str) -> list[JoinEdge]:
        return [e for e in self.edges if e.touches(table)]

    def find(self, t1: str, c1: str, t2: str, c2: str) -> JoinEdge | None:
        want = _normalize_endpoints(t1, c1, t2, c2)
        for e in self.edges:
            if e.key() == want:
                return e
        return None


@dataclass
class Catalog:
    tables: dict[str, TableData]
    join_graph: JoinGraph
    _fingerprint: str | None = field(default=None, repr=False)

    def table(self, name: str) -> TableData:
        try:
            return self.tables[name]
        except KeyError:
            raise UnknownTable(f"no table named {name!r}") from None

    def fingerprint(self) -> str:
        """Content hash over schema, dictionaries, data and join graph."""
        if self._fingerprint is None:
            h = hashlib.blake2b(digest_size=16)
            for name in sorted(self.tables):
                t = self.tables[name]
                h.update(name.encode())
                h.update(str(t.rows).encode())
                for col in t.columns:
                    h.update(col.name.encode())
                    h.update(col.kind.encode())
                    if col.dictionary is not None:
                        for raw in sorted(col.dictionary):
                            h.update(raw.encode())
                            h.update(str(col.dictionary[raw]).encode())
                    h.update(np.ascontiguousarray(t.column_store[col.name]).tobytes())
                    h.update(np.ascontiguousarray(t.null_mask[col.name]).tobytes())
            for e in sorted(self.join_graph.edges, key=JoinEdge.key):
                h.update(repr(e.key()).encode())
                h.update(e.key_role.encode())
            self._fingerprint = h.hexdigest()
        return self._fingerprint


# --- schema parsing ----------------------------------------------------------


_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


def _check_ident(name: str, what: str, origin: str, lineno: int) -> str:
    if not _IDENT_RE.match(name):
        raise SchemaError(f"{origin}:{lineno}: {what} {name!r} is not a valid identifier")
    return name


def _parse_schema(text: str, origin: str):
    """Returns (ordered {table: [(col, kind), ...]}, [edge tuples])."""
    tables: dict[str, list[tuple[str, str]]] = {}
    edges: list[tuple[str, str, str, str, str]] = []
    current: str | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "table":
            if len(parts) != 2:
                raise SchemaError(f"{origin}:{lineno}: expected 'table <name>'")
            name = _check_ident(parts[1], "table name", origin, lineno)
            if name in tables:
                raise DuplicateTableName(f"{origin}:{lineno}: table {name!r} declared twice")
            tables[name] = []
            current = name
        elif parts[0] == "column":
            if current is None:
                raise SchemaError(f"{origin}:{lineno}: 'column' outside a table block")
            if len(parts) != 3 or parts[2] not in (CATEGORICAL, CONTINUOUS):
                raise SchemaError(
                    f"{origin}:{lineno}: expected 'column <name> <categorical|continuous>'"
                )
            if any(c == parts[1] for c, _ in tables[current]):
                raise SchemaError(f"{origin}:{lineno}: column {parts[1]!r} declared twice")
            _check_ident(parts[1], "column name", origin, lineno)
            tables[current].append((parts[1], parts[2]))
        elif parts[0] == "join":
            rest = line[len("join"):].strip()
            sides = rest.split("=")
            if len(sides) != 2:
                raise SchemaError(f"{origin}:{lineno}: expected 'join t1.c1 = t2.c2 [role]'")
            left = sides[0].strip()
            right_parts = sides[1].split()
            if len(right_parts) not in (1, 2):
                raise SchemaError(f"{origin}:{lineno}: expected 'join t1.c1 = t2.c2 [role]'")
            right = right_parts[0].strip()
            role = right_parts[1] if len(right_parts) == 2 else "fkfk"
            if role not in ("pkfk", "fkfk"):
                raise SchemaError(f"{origin}:{lineno}: join role must be pkfk or fkfk")
            try:
                t1, c1 = left.split(".")
                t2, c2 = right.split(".")
            except ValueError:
                raise SchemaError(f"{origin}:{lineno}: join endpoints must be t.c") from None
            edges.append((t1, c1, t2, c2, role))
        else:
            raise SchemaError(f"{origin}:{lineno}: unrecognized directive {parts[0]!r}")
    if not tables:
        raise SchemaError(f"{origin}: schema declares no tables")
    return tables, edges


def _encode_categorical(raw_values: list[str | None], table: str, column: str):
    """Integer codes for raw tokens; identity mapping when all parse as int64."""
    present = sorted({v for v in raw_values if v is not None})
    as_int: dict[str, int] | None = {}
    for tok in present:
        try:
            i = int(tok)
        except ValueError:
            as_int = None
            break
        if not (_INT64_MIN <= i <= _INT64_MAX):
            as_int = None
            break
        as_int[tok] = i
    if as_int is not None and len(set(as_int.values())) == len(as_int):
        dictionary = as_int
    else:
        dictionary = {tok: code for code, tok in enumerate(present)}
    codes = np.zeros(len(raw_values), dtype=np.int64)
    nulls = np.zeros(len(raw_values), dtype=bool)
    for i, v in enumerate(raw_values):
        if v is None:
            nulls[i] = True
        else:
            codes[i] = dictionary[v]
    return codes, nulls, dictionary


def _encode_continuous(raw_values: list[str | None], table: str, column: str):
    vals = np.full(len(raw_values), np.nan, dtype=np.float64)
    nulls = np.zeros(len(raw_values), dtype=bool)
    for i, v in enumerate(raw_values):
        if v is None:
            nulls[i] = True
            continue
        try:
            vals[i] = float(v)
        except ValueError:
            raise ColumnTypeMismatch(table, column, i + 1, v) from None
        if not np.isfinite(vals[i]):
            raise ColumnTypeMismatch(table, column, i + 1, v)
    return vals, nulls


def build_table(name: str, columns: list[tuple[str, str, list]]) -> TableData:
    """Programmatic table construction, mainly for synthetic data and tests.

    ``columns`` is a list of (column_name, kind, values); use None for nulls.
    Values go through the same encoding as CSV ingestion.
    """
    metas: list[ColumnMeta] = []
    store: dict[str, np.ndarray] = {}
    masks: dict[str, np.ndarray] = {}
    nrows = len(columns[0][2]) if columns else 0
    for cname, kind, values in columns:
        if len(values) != nrows:
            raise ValueError(f"column {cname!r} has {len(values)} values, expected {nrows}")
        raw = [None if v is None else str(v) for v in values]
        if kind == CATEGORICAL:
            arr, nulls, dictionary = _encode_categorical(raw, name, cname)
        elif kind == CONTINUOUS:
            arr, nulls = _encode_continuous(raw, name, cname)
            dictionary = None
        else:
            raise ValueError(f"unknown column kind {kind!r}")
        meta = ColumnMeta(name=cname, kind=kind, dictionary=dictionary)
        _fill_stats(meta, arr, nulls)
        metas.append(meta)
        store[cname] = arr
        masks[cname] = nulls
    return TableData(name=name, columns=metas, rows=nrows, column_store=store, null_mask=masks)


def build_catalog(tables: list[TableData], edges: list[tuple]) -> Catalog:
    """Assemble a Catalog from prebuilt tables and (t1, c1, t2, c2[, role]) edges."""
    by_name: dict[str, TableData] = {}
    for t in tables:
        if t.name in by_name:
            raise DuplicateTableName(f"table {t.name!r} given twice")
        by_name[t.name] = t
    graph = _build_join_graph(by_name, [tuple(e) if len(e) == 5 else (*e, "fkfk") for e in edges])
    return Catalog(tables=by_name, join_graph=graph)


def _fill_stats(meta: ColumnMeta, arr: np.ndarray, nulls: np.ndarray) -> None:
    meta.null_count = int(nulls.sum())
    present = arr[~nulls]
    meta.domain_size = int(np.unique(present).size)
    if present.size:
        meta.min = float(present.min())
        meta.max = float(present.max())
    else:
        meta.min = None
        meta.max = None


def _build_join_graph(tables: dict[str, TableData], raw_edges: list[tuple]) -> JoinGraph:
    edges: list[JoinEdge] = []
    seen: set[tuple] = set()
    for t1, c1, t2, c2, role in raw_edges:
        for t, c in ((t1, c1), (t2, c2)):
            if t not in tables:
                raise UnknownTable(f"join references unknown table {t!r}")
            tables[t].column(c)
        edge = JoinEdge(t1, c1, t2, c2, key_role=role)
        if edge.key() in seen:
            raise SchemaError(f"duplicate join edge {edge}")
        seen.add(edge.key())
        edges.append(edge)
    edges.sort(key=JoinEdge.key)
    return JoinGraph(nodes=sorted(tables), edges=edges)


def load_catalog(schema_file, data_dir) -> Catalog:
    """Parse a schema file and ingest one CSV per declared table."""
    schema_path = Path(schema_file)
    data_path = Path(data_dir)
    declared, raw_edges = _parse_schema(
        schema_path.read_text(encoding="utf-8"), origin=str(schema_path)
    )
    tables: dict[str, TableData] = {}
    for name, cols in declared.items():
        csv_path = data_path / f"{name}.csv"
        if not csv_path.exists():
            raise MissingTableFile(f"no data file for table {name!r}: {csv_path}")
        tables[name] = _load_table(name, cols, csv_path)
    graph = _build_join_graph(tables, raw_edges)
    return Catalog(tables=tables, join_graph=graph)


def _load_table(name: str, cols: list[tuple[str, str]], csv_path: Path) -> TableData:
    with open(csv_path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{csv_path}: missing header row") from None
        declared_names = [c for c, _ in cols]
        if sorted(header) != sorted(declared_names):
            raise SchemaError(
                f"{csv_path}: header {header} does not match declared columns {declared_names}"
            )
        positions = {c: header.index(c) for c in declared_names}
        raw_columns: dict[str, list] = {c: [] for c in declared_names}
        for rownum, row in enumerate(reader, start=1):
            if len(row) != len(header):
                raise SchemaError(f"{csv_path}: row {rownum} has {len(row)} fields, expected {len(header)}")
            for c in declared_names:
                tok = row[positions[c]]
                raw_columns[c].append(None if tok == "" else tok)

    metas: list[ColumnMeta] = []
    store: dict[str, np.ndarray] = {}
    masks: dict[str, np.ndarray] = {}
    nrows = len(next(iter(raw_columns.values()))) if raw_columns else 0
    for cname, kind in cols:
        raw = raw_columns[cname]
        if kind == CATEGORICAL:
            arr, nulls, dictionary = _encode_categorical(raw, name, cname)
        else:
            arr, nulls = _encode_continuous(raw, name, cname)
            dictionary = None
        meta = ColumnMeta(name=cname, kind=kind, dictionary=dictionary)
        _fill_stats(meta, arr, nulls)
        metas.append(meta)
        store[cname] = arr
        masks[cname] = nulls
    return TableData(name=name, columns=metas, rows=nrows, column_store=store, null_mask=masks)


def column_distinct_count(catalog: Catalog, table: str, column: str) -> int:
    """Exact distinct count over the non-null values of one column."""
    t = catalog.table(table)
    t.column(column)
    vals = t.values(column)
    nulls = t.nulls(column)
    return int(np.unique(vals[~nulls]).size)
