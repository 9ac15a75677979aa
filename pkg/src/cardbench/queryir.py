"""Canonical query form: SQL-subset parser and sub-plan space enumeration.

Supported statements look like

    SELECT COUNT(*) FROM t1 [alias], t2, ... WHERE <cond> AND <cond> ...

where each condition is either an equi-join ``a.x = b.y`` matching an edge
of the catalog join graph, or a filter ``a.x <op> literal`` with
``op in {=, <, <=, >, >=}``, or ``a.x IN (v1, v2, ...)``. Conjunctions
only. Every query is normalized to one region per (table, column): a closed
interval or a finite value set. Strict bounds are turned into closed ones
(integer step for categorical codes, float nextafter for continuous), and
one-sided ranges are clamped to the column's observed min/max.

The full EBNF grammar ships in docs/grammar.md.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterable, Union

import numpy as np

from .catalog import CATEGORICAL, Catalog, JoinEdge
from .errors import (
    CyclicJoinGraph,
    DisconnectedJoinGraph,
    NonEquiJoin,
    QuerySyntaxError,
    UnknownJoinEdge,
    UnknownTable,
)


# --- regions -----------------------------------------------------------------


@dataclass(frozen=True)
class Interval:
    """Closed interval [lo, hi]; empty regions are represented as ValueSet(())."""

    lo: float
    hi: float


@dataclass(frozen=True)
class ValueSet:
    values: frozenset[float]


Region = Union[Interval, ValueSet]


def region_mask(region: Region, values: np.ndarray, nulls: np.ndarray) -> np.ndarray:
    """Boolean row mask for a region. Nulls never satisfy any region."""
    if isinstance(region, Interval):
        m = (values >= region.lo) & (values <= region.hi)
    else:
        if not region.values:
            return np.zeros(len(values), dtype=bool)
        m = np.isin(values, sorted(region.values))
    return m & ~nulls


def intersect_regions(a: Region, b: Region) -> Region:
    if isinstance(a, Interval) and isinstance(b, Interval):
        lo, hi = max(a.lo, b.lo), min(a.hi, b.hi)
        if lo > hi:
            return ValueSet(frozenset())
        return Interval(lo, hi)
    if isinstance(a, Interval):
        a, b = b, a
    if isinstance(b, Interval):
        return ValueSet(frozenset(v for v in a.values if b.lo <= v <= b.hi))
    return ValueSet(a.values & b.values)


@dataclass(frozen=True)
class Predicate:
    table: str
    column: str
    region: Region


@dataclass(frozen=True)
class Query:
    id: str
    tables: tuple[str, ...]
    join_edges: tuple[JoinEdge, ...]
    predicates: tuple[Predicate, ...]

    def predicates_for(self, table: str) -> tuple[Predicate, ...]:
        return tuple(p for p in self.predicates if p.table == table)


@dataclass(frozen=True)
class SubPlanQuery:
    parent: str
    tables: tuple[str, ...]
    join_edges: tuple[JoinEdge, ...]
    predicates: tuple[Predicate, ...]

    @property
    def key(self) -> str:
        return "+".join(self.tables)

    def predicates_for(self, table: str) -> tuple[Predicate, ...]:
        return tuple(p for p in self.predicates if p.table == table)

    def region_for(self, table: str, column: str) -> Region | None:
        for p in self.predicates:
            if p.table == table and p.column == column:
                return p.region
        return None


@dataclass(frozen=True)
class SubPlanSpace:
    parent: str
    entries: tuple[SubPlanQuery, ...]

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)

    def keys(self) -> list[str]:
        return [e.key for e in self.entries]

    def full(self) -> SubPlanQuery:
        return self.entries[-1]


# --- tokenizer ---------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>-?\d+(\.\d+)?([eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op><=|>=|=|<|>)
  | (?P<punct>[(),.;*])
    """,
    re.VERBOSE,
)

_KEYWORDS = {"select", "count", "from", "where", "and", "in", "as"}


@dataclass(frozen=True)
class _Token:
    kind: str  # "number" | "ident" | "keyword" | "op" | "punct" | "eof"
    text: str
    pos: int


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise QuerySyntaxError(f"unexpected character {text[pos]!r}", pos)
        if m.lastgroup != "ws":
            kind = m.lastgroup
            tok = m.group()
            if kind == "ident" and tok.lower() in _KEYWORDS:
                tokens.append(_Token("keyword", tok.lower(), pos))
            else:
                tokens.append(_Token(kind, tok, pos))
        pos = m.end()
    tokens.append(_Token("eof", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self) -> _Token:
        return self.tokens[self.i]

    def next(self) -> _Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, kind: str, text: str | None = None) -> _Token:
        tok = self.next()
        if tok.kind != kind or (text is not None and tok.text != text):
            want = text if text is not None else kind
            raise QuerySyntaxError(f"expected {want!r}, found {tok.text or 'end of input'!r}", tok.pos)
        return tok

    def accept(self, kind: str, text: str | None = None) -> _Token | None:
        tok = self.peek()
        if tok.kind == kind and (text is None or tok.text == text):
            return self.next()
        return None


# --- parsing -----------------------------------------------------------------


def _parse_number(tok: _Token) -> float:
    return float(tok.text)


def _step_below(v: float, kind: str) -> float:
    if kind == CATEGORICAL:
        return float(math.ceil(v) - 1) if float(v).is_integer() else float(math.floor(v))
    return float(np.nextafter(v, -np.inf))


def _step_above(v: float, kind: str) -> float:
    if kind == CATEGORICAL:
        return float(math.floor(v) + 1) if float(v).is_integer() else float(math.ceil(v))
    return float(np.nextafter(v, np.inf))


def parse_query(text: str, catalog: Catalog, query_id: str = "q") -> Query:
    """Parse one SQL-subset statement into the canonical conjunctive form."""
    p = _Parser(text)
    p.expect("keyword", "select")
    p.expect("keyword", "count")
    p.expect("punct", "(")
    p.expect("punct", "*")
    p.expect("punct", ")")
    p.expect("keyword", "from")

    alias_to_table: dict[str, str] = {}
    tables_in_order: list[str] = []
    while True:
        tok = p.expect("ident")
        table = tok.text
        if table not in catalog.tables:
            raise UnknownTable(f"unknown table {table!r} (at position {tok.pos})")
        alias = table
        if p.accept("keyword", "as"):
            alias = p.expect("ident").text
        elif p.peek().kind == "ident":
            alias = p.next().text
        if alias in alias_to_table:
            raise QuerySyntaxError(f"duplicate table or alias {alias!r}", tok.pos)
        if table in tables_in_order:
            raise QuerySyntaxError(f"table {table!r} listed twice (self-joins unsupported)", tok.pos)
        alias_to_table[alias] = table
        tables_in_order.append(table)
        if not p.accept("punct", ","):
            break

    join_conds: list[tuple[str, str, str, str, int]] = []
    regions: dict[tuple[str, str], Region] = {}

    def resolve(alias: str, column: str, pos: int) -> tuple[str, str]:
        if alias not in alias_to_table:
            raise UnknownTable(f"unknown table or alias {alias!r} (at position {pos})")
        table = alias_to_table[alias]
        catalog.table(table).column(column)  # raises UnknownColumn
        return table, column

    def add_region(table: str, column: str, region: Region):
        key = (table, column)
        if key in regions:
            regions[key] = intersect_regions(regions[key], region)
        else:
            regions[key] = region

    if p.accept("keyword", "where"):
        while True:
            t1 = p.expect("ident")
            p.expect("punct", ".")
            c1 = p.expect("ident")
            op_tok = p.peek()
            if op_tok.kind == "op":
                p.next()
                rhs = p.peek()
                if rhs.kind == "ident":
                    # column-to-column comparison: join predicate
                    p.next()
                    p.expect("punct", ".")
                    c2 = p.expect("ident")
                    if op_tok.text != "=":
                        raise NonEquiJoin(
                            f"only equi-joins are supported, found {op_tok.text!r} "
                            f"(at position {op_tok.pos})"
                        )
                    ta, ca = resolve(t1.text, c1.text, t1.pos)
                    tb, cb = resolve(rhs.text, c2.text, rhs.pos)
                    join_conds.append((ta, ca, tb, cb, op_tok.pos))
                elif rhs.kind == "number":
                    p.next()
                    table, column = resolve(t1.text, c1.text, t1.pos)
                    meta = catalog.table(table).column(column)
                    v = _parse_number(rhs)
                    lo_clamp = meta.min if meta.min is not None else -np.inf
                    hi_clamp = meta.max if meta.max is not None else np.inf
                    if op_tok.text == "=":
                        region: Region = Interval(v, v)
                    elif op_tok.text == "<=":
                        region = Interval(lo_clamp, v)
                    elif op_tok.text == "<":
                        region = Interval(lo_clamp, _step_below(v, meta.kind))
                    elif op_tok.text == ">=":
                        region = Interval(v, hi_clamp)
                    else:  # >
                        region = Interval(_step_above(v, meta.kind), hi_clamp)
                    if isinstance(region, Interval) and region.lo > region.hi:
                        region = ValueSet(frozenset())
                    add_region(table, column, region)
                else:
                    raise QuerySyntaxError(
                        f"expected column or literal after {op_tok.text!r}", rhs.pos
                    )
            elif op_tok.kind == "keyword" and op_tok.text == "in":
                p.next()
                p.expect("punct", "(")
                values = []
                while True:
                    values.append(_parse_number(p.expect("number")))
                    if not p.accept("punct", ","):
                        break
                p.expect("punct", ")")
                table, column = resolve(t1.text, c1.text, t1.pos)
                add_region(table, column, ValueSet(frozenset(values)))
            else:
                raise QuerySyntaxError(f"expected operator or IN, found {op_tok.text!r}", op_tok.pos)
            if not p.accept("keyword", "and"):
                break

    p.accept("punct", ";")
    tail = p.peek()
    if tail.kind != "eof":
        raise QuerySyntaxError(f"unexpected trailing input {tail.text!r}", tail.pos)

    tables = tuple(sorted(tables_in_order))
    edges: list[JoinEdge] = []
    for ta, ca, tb, cb, pos in join_conds:
        edge = catalog.join_graph.find(ta, ca, tb, cb)
        if edge is None:
            raise UnknownJoinEdge(
                f"{ta}.{ca} = {tb}.{cb} is not an edge of the catalog join graph "
                f"(at position {pos})"
            )
        if edge not in edges:
            edges.append(edge)
    _check_join_shape(tables, edges)

    predicates = tuple(
        Predicate(table=t, column=c, region=regions[(t, c)])
        for (t, c) in sorted(regions)
    )
    return Query(id=query_id, tables=tables, join_edges=tuple(sorted(edges, key=JoinEdge.key)),
                 predicates=predicates)


def _check_join_shape(tables: tuple[str, ...], edges: list[JoinEdge]) -> None:
    if len(tables) == 1 and not edges:
        return
    adj: dict[str, set[str]] = {t: set() for t in tables}
    for e in edges:
        if e.table_a not in adj or e.table_b not in adj:
            raise UnknownJoinEdge(f"join edge {e} references a table outside the FROM list")
        adj[e.table_a].add(e.table_b)
        adj[e.table_b].add(e.table_a)
    seen = {tables[0]}
    stack = [tables[0]]
    while stack:
        for nxt in adj[stack.pop()]:
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    if len(seen) != len(tables):
        missing = sorted(set(tables) - seen)
        raise DisconnectedJoinGraph(f"tables {missing} are not connected by any join predicate")
    if len(edges) != len(tables) - 1:
        raise CyclicJoinGraph(f"{len(edges)} join edges over {len(tables)} tables form a cycle")


# --- pretty printing ---------------------------------------------------------


def _fmt_value(v: float) -> str:
    if float(v).is_integer() and abs(v) < 2**53:
        return str(int(v))
    return repr(float(v))


def format_query(query: Query, catalog: Catalog) -> str:
    """Canonical single-line SQL text; parsing it back yields an equal Query."""
    conds: list[str] = []
    for e in query.join_edges:
        conds.append(f"{e.table_a}.{e.column_a} = {e.table_b}.{e.column_b}")
    for p in query.predicates:
        meta = catalog.table(p.table).column(p.column)
        col = f"{p.table}.{p.column}"
        r = p.region
        if isinstance(r, ValueSet):
            if not r.values:
                # contradictory conjunction; emit a parseable always-false range
                conds.append(f"{col} >= 1 AND {col} <= 0")
                continue
            vals = ", ".join(_fmt_value(v) for v in sorted(r.values))
            conds.append(f"{col} IN ({vals})")
        elif r.lo == r.hi:
            conds.append(f"{col} = {_fmt_value(r.lo)}")
        else:
            lo_clamp = meta.min if meta.min is not None else -np.inf
            hi_clamp = meta.max if meta.max is not None else np.inf
            parts = []
            if r.lo != lo_clamp:
                parts.append(f"{col} >= {_fmt_value(r.lo)}")
            if r.hi != hi_clamp:
                parts.append(f"{col} <= {_fmt_value(r.hi)}")
            if not parts:
                # region spans the whole observed domain but still excludes nulls
                parts.append(f"{col} >= {_fmt_value(r.lo)}")
            conds.extend(parts)
    sql = "SELECT COUNT(*) FROM " + ", ".join(query.tables)
    if conds:
        sql += " WHERE " + " AND ".join(conds)
    return sql


# --- sub-plan enumeration ------------------------------------------------------


def connected_subsets(tables: Iterable[str], edges: Iterable[JoinEdge]) -> list[tuple[str, ...]]:
    """All connected subsets of a join graph, each discovered exactly once.

    Recursive frontier expansion with an excluded set, so no subset is
    produced twice; the final ordering is (size, lexicographic tuple).
    """
    nodes = sorted(tables)
    index = {t: i for i, t in enumerate(nodes)}
    n = len(nodes)
    adj_bits = [0] * n
    for e in edges:
        a, b = index[e.table_a], index[e.table_b]
        adj_bits[a] |= 1 << b
        adj_bits[b] |= 1 << a

    found: list[int] = []

    def neighborhood(subset: int) -> int:
        out = 0
        s = subset
        while s:
            low = s & -s
            out |= adj_bits[low.bit_length() - 1]
            s ^= low
        return out & ~subset

    def expand(subset: int, excluded: int):
        found.append(subset)
        frontier = neighborhood(subset) & ~excluded
        # enumerate non-empty sub-subsets of the frontier
        sub = frontier
        subsets = []
        while sub:
            subsets.append(sub)
            sub = (sub - 1) & frontier
        for extra in reversed(subsets):  # smaller extensions first; order is cosmetic
            expand(subset | extra, excluded | frontier)

    for i in range(n):
        expand(1 << i, (1 << i) - 1)

    def to_tuple(bits: int) -> tuple[str, ...]:
        return tuple(nodes[i] for i in range(n) if bits & (1 << i))

    result = [to_tuple(b) for b in found]
    result.sort(key=lambda t: (len(t), t))
    return result


def make_subplan(query: Query, tables: tuple[str, ...]) -> SubPlanQuery:
    """Restriction of a query to a table subset (induced edges and predicates)."""
    tset = set(tables)
    edges = tuple(e for e in query.join_edges if e.table_a in tset and e.table_b in tset)
    preds = tuple(p for p in query.predicates if p.table in tset)
    return SubPlanQuery(parent=query.id, tables=tuple(sorted(tables)),
                        join_edges=edges, predicates=preds)


def enumerate_subplans(query: Query, catalog: Catalog) -> SubPlanSpace:
    """The sub-plan query space: every connected subset, singletons through
    the full query, ordered by size then table tuple."""
    subsets = connected_subsets(query.tables, query.join_edges)
    entries = tuple(make_subplan(query, s) for s in subsets)
    return SubPlanSpace(parent=query.id, entries=entries)
