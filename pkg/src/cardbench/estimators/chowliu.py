"""Tree-shaped Bayesian network estimator with fanout-based join handling.

Per table, attributes are discretized (values kept one-per-bin while the
domain fits the bin budget, equi-depth bins otherwise; nulls get a
dedicated bin) and a maximum-spanning-tree over pairwise mutual
information picks the network structure. Each node stores a conditional
probability table given its single parent; single-table probabilities come
from exact message passing over the tree with per-bin region weights.

Multi-table estimates start from the (lexicographically first) member
table's count and multiply one expected fanout per join edge, read from
per-edge key frequency tables that include zero-match keys. The
expectation conditions only on regions over the key columns themselves;
all other predicates of a joined table enter as an independent
tree-inferred selectivity. The region on the column through which a table
is entered is consumed by the fanout term and excluded from that
selectivity, which keeps its mass from being counted twice.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..catalog import Catalog, TableData
from ..errors import InsufficientData, UnmodeledColumn
from ..queryir import Interval, Region, SubPlanQuery
from .base import EstimatorModel
from .joins import spanning_order


@dataclass
class Binning:
    """Maps column values to bin codes 0..n_bins-1; bin n_bins is the null bin."""

    kind: str                 # "identity" | "equidepth"
    values: np.ndarray        # identity: sorted distinct values, one per bin
    edges: np.ndarray         # equidepth: n_bins+1 boundaries
    distinct: np.ndarray      # distinct values per bin
    n_bins: int

    def codes(self, values: np.ndarray, nulls: np.ndarray) -> np.ndarray:
        out = np.full(len(values), self.n_bins, dtype=np.int64)
        present = ~nulls
        if self.kind == "identity":
            idx = np.searchsorted(self.values, values[present])
            idx = np.minimum(idx, max(self.n_bins - 1, 0))
            out[present] = idx
        else:
            idx = np.searchsorted(self.edges, values[present], side="right") - 1
            out[present] = np.clip(idx, 0, self.n_bins - 1)
        return out

    def region_weights(self, region: Region) -> np.ndarray:
        """Weight in [0, 1] per bin (the null bin always gets 0)."""
        w = np.zeros(self.n_bins + 1, dtype=np.float64)
        if self.kind == "identity":
            if isinstance(region, Interval):
                w[: self.n_bins] = (self.values >= region.lo) & (self.values <= region.hi)
            elif region.values:
                w[: self.n_bins] = np.isin(self.values, sorted(region.values))
            return w
        if isinstance(region, Interval):
            for j in range(self.n_bins):
                lo, hi = self.edges[j], self.edges[j + 1]
                if hi < region.lo or lo > region.hi:
                    continue
                if hi == lo:
                    w[j] = 1.0 if region.lo <= lo <= region.hi else 0.0
                else:
                    overlap = min(region.hi, hi) - max(region.lo, lo)
                    w[j] = max(0.0, min(1.0, overlap / (hi - lo)))
        else:
            for v in region.values:
                if v < self.edges[0] or v > self.edges[-1]:
                    continue
                j = int(np.clip(np.searchsorted(self.edges, v, side="right") - 1,
                                0, self.n_bins - 1))
                if self.distinct[j]:
                    w[j] = min(1.0, w[j] + 1.0 / self.distinct[j])
        return w


def make_binning(values: np.ndarray, nulls: np.ndarray, max_bins: int) -> Binning:
    present = np.sort(values[~nulls].astype(np.float64))
    uniq = np.unique(present)
    if len(uniq) <= max_bins:
        distinct = np.ones(len(uniq), dtype=np.int64)
        return Binning(kind="identity", values=uniq, edges=np.empty(0),
                       distinct=distinct, n_bins=len(uniq))
    m = len(present)
    b = max_bins
    pos = [(m * j) // b for j in range(b)] + [m]
    edges = np.array([present[min(p, m - 1)] for p in pos], dtype=np.float64)
    edges[-1] = present[-1]
    # merge duplicate boundaries by nudging is unnecessary: searchsorted keeps
    # every row in exactly one bin; empty bins simply never receive mass
    distinct = np.array(
        [len(np.unique(present[pos[j]:pos[j + 1]])) for j in range(b)], dtype=np.int64
    )
    return Binning(kind="equidepth", values=np.empty(0), edges=edges,
                   distinct=distinct, n_bins=b)


def mutual_information(codes_a: np.ndarray, codes_b: np.ndarray,
                       bins_a: int, bins_b: int) -> float:
    """MI in nats from the empirical joint distribution of two code arrays."""
    n = len(codes_a)
    joint = np.zeros((bins_a, bins_b), dtype=np.float64)
    np.add.at(joint, (codes_a, codes_b), 1.0)
    joint /= n
    pa = joint.sum(axis=1)
    pb = joint.sum(axis=0)
    nz = joint > 0
    denom = np.outer(pa, pb)
    return float((joint[nz] * np.log(joint[nz] / denom[nz])).sum())


@dataclass
class TableNetwork:
    attrs: list[str]
    binnings: dict[str, Binning]
    parent: dict[str, str | None]
    cpts: dict[str, np.ndarray]    # root: 1-D marginal; child: (child_bins, parent_bins)
    children: dict[str, list[str]]
    rows: int


def _learn_table_network(table: TableData, max_bins: int,
                         excluded: set[str]) -> TableNetwork:
    attrs = [c.name for c in table.columns if f"{table.name}.{c.name}" not in excluded]
    if table.rows == 0:
        raise InsufficientData(f"table {table.name!r} has no rows to model")
    binnings = {a: make_binning(table.values(a), table.nulls(a), max_bins) for a in attrs}
    codes = {a: binnings[a].codes(table.values(a), table.nulls(a)) for a in attrs}
    sizes = {a: binnings[a].n_bins + 1 for a in attrs}

    mi: dict[tuple[str, str], float] = {}
    for i, a in enumerate(attrs):
        for b in attrs[i + 1:]:
            mi[(a, b)] = mutual_information(codes[a], codes[b], sizes[a], sizes[b])

    # maximum spanning tree, deterministic tie-break on the attribute pair
    chosen: list[tuple[str, str]] = []
    comp = {a: a for a in attrs}

    def find(x):
        while comp[x] != x:
            comp[x] = comp[comp[x]]
            x = comp[x]
        return x

    for (a, b), _w in sorted(mi.items(), key=lambda kv: (-kv[1], kv[0])):
        ra, rb = find(a), find(b)
        if ra != rb:
            comp[ra] = rb
            chosen.append((a, b))

    adjacency: dict[str, list[str]] = {a: [] for a in attrs}
    for a, b in chosen:
        adjacency[a].append(b)
        adjacency[b].append(a)

    parent: dict[str, str | None] = {}
    children: dict[str, list[str]] = {a: [] for a in attrs}
    root = attrs[0] if attrs else None
    if root is not None:
        parent[root] = None
        stack = [root]
        seen = {root}
        while stack:
            node = stack.pop()
            for nxt in sorted(adjacency[node]):
                if nxt not in seen:
                    seen.add(nxt)
                    parent[nxt] = node
                    children[node].append(nxt)
                    stack.append(nxt)

    cpts: dict[str, np.ndarray] = {}
    n = table.rows
    for a in attrs:
        p = parent[a]
        if p is None:
            counts = np.bincount(codes[a], minlength=sizes[a]).astype(np.float64)
            cpts[a] = counts / n
        else:
            joint = np.zeros((sizes[a], sizes[p]), dtype=np.float64)
            np.add.at(joint, (codes[a], codes[p]), 1.0)
            col_totals = joint.sum(axis=0)
            cpt = np.empty_like(joint)
            for j in range(sizes[p]):
                if col_totals[j] > 0:
                    cpt[:, j] = joint[:, j] / col_totals[j]
                else:
                    cpt[:, j] = 1.0 / sizes[a]  # unseen parent bin: uniform row
            cpts[a] = cpt
    return TableNetwork(attrs=attrs, binnings=binnings, parent=parent,
                        cpts=cpts, children=children, rows=n)


def _tree_probability(net: TableNetwork, regions: dict[str, Region]) -> float:
    """P(all regions hold) by message passing over the attribute tree."""
    if not regions:
        return 1.0
    weights = {}
    for a in net.attrs:
        size = net.binnings[a].n_bins + 1
        if a in regions:
            weights[a] = net.binnings[a].region_weights(regions[a])
        else:
            weights[a] = np.ones(size, dtype=np.float64)

    def message(node: str) -> np.ndarray:
        """Belief over `node`'s bins, child messages folded in."""
        belief = weights[node].copy()
        for ch in net.children[node]:
            belief *= net.cpts[ch].T @ message(ch)
        return belief

    root = net.attrs[0]
    return float((net.cpts[root] * message(root)).sum())


@dataclass
class FanoutTable:
    """Per-key frequency of one edge direction: in-table key distribution and
    the number of matching out-table rows per key (zero-match keys included)."""

    keys: np.ndarray       # distinct non-null key values of the in column
    n_in: np.ndarray       # in-table rows per key
    f_out: np.ndarray      # out-table matches per key
    in_rows: int           # all in-table rows, null keys included

    def expected_fanout(self, in_region: Region | None, out_region: Region | None) -> float:
        allowed = np.ones(len(self.keys), dtype=bool)
        if in_region is not None:
            allowed &= _value_mask(in_region, self.keys)
        if out_region is not None:
            out_allowed = allowed & _value_mask(out_region, self.keys)
        else:
            out_allowed = allowed
        den = float(self.n_in[allowed].sum()) if in_region is not None else float(self.in_rows)
        if den <= 0:
            return 0.0
        num = float((self.n_in[out_allowed] * self.f_out[out_allowed]).sum())
        return num / den


def _value_mask(region: Region, keys: np.ndarray) -> np.ndarray:
    if isinstance(region, Interval):
        return (keys >= region.lo) & (keys <= region.hi)
    if not region.values:
        return np.zeros(len(keys), dtype=bool)
    return np.isin(keys, sorted(region.values))


def _build_fanout(catalog: Catalog, t_in, c_in, t_out, c_out) -> FanoutTable:
    tin, tout = catalog.table(t_in), catalog.table(t_out)
    in_vals = tin.values(c_in)[~tin.nulls(c_in)].astype(np.float64)
    out_vals = tout.values(c_out)[~tout.nulls(c_out)].astype(np.float64)
    keys, n_in = np.unique(in_vals, return_counts=True)
    out_keys, out_counts = np.unique(out_vals, return_counts=True)
    idx = np.searchsorted(out_keys, keys)
    idx_c = np.minimum(idx, max(len(out_keys) - 1, 0))
    if len(out_keys):
        found = out_keys[idx_c] == keys
        f_out = np.where(found, out_counts[idx_c], 0)
    else:
        f_out = np.zeros(len(keys), dtype=np.int64)
    return FanoutTable(keys=keys, n_in=n_in, f_out=f_out, in_rows=tin.rows)


class ChowLiuModel(EstimatorModel):
    name = "chow_liu"

    def __init__(self, catalog: Catalog, max_bins: int, excluded: frozenset[str] = frozenset()):
        super().__init__()
        self.networks: dict[str, TableNetwork] = {}
        self.fanouts: dict[tuple[str, str, str, str], FanoutTable] = {}
        self.row_counts = {t: catalog.table(t).rows for t in sorted(catalog.tables)}
        excluded_set = set(excluded)
        for tname in sorted(catalog.tables):
            self.networks[tname] = _learn_table_network(
                catalog.table(tname), max_bins, excluded_set
            )
        for edge in catalog.join_graph.edges:
            a = (edge.table_a, edge.column_a, edge.table_b, edge.column_b)
            b = (edge.table_b, edge.column_b, edge.table_a, edge.column_a)
            self.fanouts[a] = _build_fanout(catalog, *a)
            self.fanouts[b] = _build_fanout(catalog, *b)

    def _table_probability(self, subplan: SubPlanQuery, table: str,
                           skip_columns: frozenset[str] = frozenset()) -> float:
        net = self.networks[table]
        regions: dict[str, Region] = {}
        for p in subplan.predicates_for(table):
            if p.column in skip_columns:
                continue
            if p.column not in net.binnings:
                raise UnmodeledColumn(
                    f"predicate on {table}.{p.column} but the column was "
                    f"excluded when the model was built"
                )
            regions[p.column] = p.region
        return _tree_probability(net, regions)

    def estimate(self, subplan: SubPlanQuery, seed: int = 0) -> float:
        root = subplan.tables[0]
        card = self.row_counts[root] * self._table_probability(subplan, root)
        for edge, t_in, t_out in spanning_order(subplan):
            c_in, c_out = edge.endpoint(t_in), edge.endpoint(t_out)
            fanout = self.fanouts[(t_in, c_in, t_out, c_out)]
            in_region = subplan.region_for(t_in, c_in)
            out_region = subplan.region_for(t_out, c_out)
            card *= fanout.expected_fanout(in_region, out_region)
            card *= self._table_probability(subplan, t_out,
                                            skip_columns=frozenset({c_out}))
        return card
