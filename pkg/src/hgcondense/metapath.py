"""Meta-path enumeration and sparse composition."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ContractError
from .hetgraph import HeteroGraph

NORMS = ("none", "row", "sym")

# Upper bound on the estimated nnz of one SpGEMM before it is split into
# row blocks.
BLOCK_NNZ = 20_000_000


@dataclass(frozen=True)
class MetaPath:
    """Walk from the end (row) type outwards.

    ``steps[i] = (relation, transposed)``; ``types[0]`` is the end type and
    ``types[-1]`` the source type. A non-transposed step uses the relation's
    adjacency as stored, so it starts at the relation's ``src_type``.
    """
    steps: tuple
    types: tuple

    @property
    def dst_type(self):
        return self.types[0]

    @property
    def src_type(self):
        return self.types[-1]

    @property
    def hops(self):
        return len(self.steps)

    @property
    def name(self):
        return "<-".join(self.types)

    @property
    def key(self):
        return " ".join(f"{r}{'^T' if t else ''}" for r, t in self.steps)

    def __str__(self):
        return f"{self.name} [{self.key}]"


@dataclass
class ComposedAdjacency:
    path: MetaPath
    matrix: sp.csr_matrix     # N_dst x N_src
    norm: str

    @property
    def shape(self):
        return self.matrix.shape

    @property
    def nnz(self):
        return self.matrix.nnz

    def density(self):
        n, m = self.matrix.shape
        return self.matrix.nnz / (n * m) if n and m else 0.0


def _steps_from(graph: HeteroGraph, node_type):
    out = []
    for rel in graph.relations.values():
        if rel.src_type == node_type:
            out.append(((rel.name, False), rel.dst_type))
        if rel.dst_type == node_type:
            out.append(((rel.name, True), rel.src_type))
    return out


def enumerate_metapaths(graph: HeteroGraph, end_type, max_hops):
    """Every type-checked relation walk of 1..max_hops steps ending at ``end_type``.

    Each relation can be walked as stored or transposed. Ordered by hop
    count, then lexicographically by ``(relation name, transposed)`` steps.
    """
    if max_hops < 1:
        raise ContractError("hop bound must be >= 1")
    if end_type not in graph.node_counts:
        raise ContractError(f"unknown node type {end_type!r}")
    found = []
    frontier = [((), (end_type,))]
    for _ in range(max_hops):
        nxt = []
        for steps, types in frontier:
            for step, t in _steps_from(graph, types[-1]):
                item = (steps + (step,), types + (t,))
                nxt.append(item)
                found.append(item)
        frontier = nxt
    found.sort(key=lambda it: (len(it[0]), it[0]))
    return [MetaPath(steps, types) for steps, types in found]


def step_matrix(graph: HeteroGraph, step):
    name, transposed = step
    adj = graph.relations[name].adjacency
    return adj.T.tocsr() if transposed else adj


def row_normalize(m):
    m = sp.csr_matrix(m, dtype=np.float64, copy=True)
    sums = np.asarray(m.sum(axis=1)).ravel()
    inv = np.divide(1.0, sums, out=np.zeros_like(sums), where=sums > 0)
    return sp.diags(inv) @ m


def sym_normalize(pattern):
    """``D_r^-1/2 B D_c^-1/2`` on a binary rectangular matrix: the off-diagonal
    block of the symmetric normalisation of ``[[0, B], [B^T, 0]]``."""
    b = sp.csr_matrix(pattern, dtype=np.float64, copy=True)
    b.data[:] = 1.0
    dr = np.asarray(b.sum(axis=1)).ravel()
    dc = np.asarray(b.sum(axis=0)).ravel()
    ir = np.divide(1.0, np.sqrt(dr), out=np.zeros_like(dr), where=dr > 0)
    ic = np.divide(1.0, np.sqrt(dc), out=np.zeros_like(dc), where=dc > 0)
    return (sp.diags(ir) @ b @ sp.diags(ic)).tocsr()


def spgemm(a, b, block_nnz=BLOCK_NNZ):
    """``a @ b``; split into row blocks when the nnz estimate is too large."""
    a = sp.csr_matrix(a)
    b = sp.csr_matrix(b)
    b_row = np.diff(b.indptr).astype(np.float64)
    a_pat = a.copy()
    a_pat.data = np.ones_like(a_pat.data)
    est_rows = a_pat @ b_row
    total = float(est_rows.sum())
    if total <= block_nnz:
        return (a @ b).tocsr()
    blocks = []
    start = 0
    cum = np.cumsum(est_rows)
    n = a.shape[0]
    while start < n:
        base = cum[start - 1] if start else 0.0
        stop = int(np.searchsorted(cum, base + block_nnz, side="right"))
        stop = max(stop, start + 1)
        blocks.append((a[start:stop] @ b).tocsr())
        start = stop
    return sp.vstack(blocks, format="csr")


def compose(graph: HeteroGraph, path: MetaPath, norm="none", masks=None,
            block_nnz=BLOCK_NNZ) -> ComposedAdjacency:
    """Chain product of the path's step matrices.

    ``none`` keeps path counts of the binary steps, ``row`` row-normalises
    each step before multiplying, ``sym`` returns the bipartite symmetric
    normalisation of the composed pattern. ``masks`` (type -> bool array)
    zeroes out intermediate nodes of those types.
    """
    if norm not in NORMS:
        raise ContractError(f"unknown normalisation {norm!r}")
    for i, (name, transposed) in enumerate(path.steps):
        rel = graph.relations.get(name)
        if rel is None:
            raise ContractError(f"path {path}: unknown relation {name}")
        start, end = (rel.dst_type, rel.src_type) if transposed else (rel.src_type, rel.dst_type)
        if (start, end) != (path.types[i], path.types[i + 1]):
            raise ContractError(f"path {path}: step {i} does not type-check")

    masks = masks or {}
    acc = None
    for i, step in enumerate(path.steps):
        m = step_matrix(graph, step).astype(np.float64)
        if norm == "row":
            m = row_normalize(m)
        acc = m if acc is None else spgemm(acc, m, block_nnz)
        nxt = path.types[i + 1]
        if i < path.hops - 1 and nxt in masks:
            acc = acc @ sp.diags(np.asarray(masks[nxt], dtype=np.float64))
    acc = sp.csr_matrix(acc)
    acc.eliminate_zeros()
    if norm == "sym":
        acc = sym_normalize(acc)
    acc.sort_indices()
    return ComposedAdjacency(path, acc, norm)


def pattern(adj):
    """Binary CSR with the same sparsity as ``adj`` (matrix or composed)."""
    m = adj.matrix if isinstance(adj, ComposedAdjacency) else adj
    p = sp.csr_matrix(m, copy=True)
    p.eliminate_zeros()
    p.data = np.ones_like(p.data)
    p.sort_indices()
    return p


def reachable_set(adj: ComposedAdjacency, node):
    n = adj.matrix.shape[0]
    if not 0 <= node < n:
        raise ContractError(f"node {node} outside [0, {n})")
    m = adj.matrix
    lo, hi = m.indptr[node], m.indptr[node + 1]
    cols = m.indices[lo:hi][m.data[lo:hi] != 0]
    return set(int(c) for c in cols)


def describe(paths):
    """Plain-text inventory of composed meta-paths."""
    lines = [f"{'path':<24} {'steps':<28} {'hops':>4} {'shape':>16} {'nnz':>10} {'density':>9}"]
    for c in paths:
        shape = f"{c.shape[0]}x{c.shape[1]}"
        lines.append(
            f"{c.path.name:<24} {c.path.key:<28} {c.path.hops:>4} {shape:>16} "
            f"{c.nnz:>10} {c.density():>9.2e}"
        )
    return "\n".join(lines)
