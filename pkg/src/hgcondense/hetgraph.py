"""Heterogeneous graph container, directory format, validation and induction.

Directory layout::

    schema            type <name> <count> | target <name> | relation <name> <src> <dst>
    <relation>.edges  "src dst" per line
    <type>.feat       "<rows> <cols>" header, then one row per line
    labels            "node_id class_id" per line (target type only)
    train.ids, valid.ids, test.ids   one target id per line
    meta.json         free-form provenance (optional)
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import ContractError, GraphLoadError, GraphValidationError

SPLITS = ("train", "valid", "test")


@dataclass(frozen=True)
class Relation:
    name: str
    src_type: str
    dst_type: str
    adjacency: sp.csr_matrix

    @property
    def nnz(self):
        return self.adjacency.nnz


@dataclass
class HeteroGraph:
    node_counts: dict[str, int]
    relations: dict[str, Relation]
    target_type: str
    labels: np.ndarray
    features: dict[str, np.ndarray] = field(default_factory=dict)
    splits: dict[str, np.ndarray] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    @property
    def node_types(self):
        return list(self.node_counts)

    def split(self, name):
        return self.splits.get(name, np.empty(0, dtype=np.int64))

    def n_classes(self):
        lab = self.labels[self.labels >= 0]
        return int(lab.max()) + 1 if lab.size else 0

    def relations_between(self, a, b):
        """Relations linking types ``a`` and ``b`` in either direction, as
        ``(relation, transposed)`` so that the returned matrix is ``a x b``."""
        out = []
        for rel in self.relations.values():
            if rel.src_type == a and rel.dst_type == b:
                out.append((rel, False))
            elif rel.src_type == b and rel.dst_type == a:
                out.append((rel, True))
        return out

    def neighbors_matrix(self, a, b):
        """Binary ``N_a x N_b`` union of every relation between ``a`` and ``b``."""
        acc = sp.csr_matrix((self.node_counts[a], self.node_counts[b]))
        for rel, transposed in self.relations_between(a, b):
            m = rel.adjacency.T if transposed else rel.adjacency
            acc = acc + m
            if a == b and not transposed:
                acc = acc + rel.adjacency.T
        acc = acc.tocsr()
        acc.data[:] = 1.0
        acc.eliminate_zeros()
        acc.sort_indices()
        return acc

    def degree(self, node_type):
        """Total edge count touching each node of ``node_type``."""
        deg = np.zeros(self.node_counts[node_type], dtype=np.int64)
        for rel in self.relations.values():
            if rel.src_type == node_type:
                deg += np.diff(rel.adjacency.indptr)
            if rel.dst_type == node_type:
                deg += np.bincount(rel.adjacency.indices, minlength=deg.shape[0])
        return deg

    def schema_neighbors(self):
        adj = {t: set() for t in self.node_counts}
        for rel in self.relations.values():
            if rel.src_type != rel.dst_type:
                adj[rel.src_type].add(rel.dst_type)
                adj[rel.dst_type].add(rel.src_type)
        return adj

    def n_edges(self):
        return sum(r.nnz for r in self.relations.values())


def binary_csr(rows, cols, shape):
    """Binary CSR with duplicates collapsed and column indices sorted."""
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    m = sp.csr_matrix((np.ones(rows.shape[0]), (rows, cols)), shape=shape)
    m.sum_duplicates()
    m.data[:] = 1.0
    m.sort_indices()
    return m


# --------------------------------------------------------------------------
# validation
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Issue:
    kind: str
    location: str
    message: str

    def __str__(self):
        return f"[{self.kind}] {self.location}: {self.message}"


def validate(graph: HeteroGraph) -> list[Issue]:
    """Return every broken invariant; an empty list means well-formed."""
    issues = []
    counts = graph.node_counts
    seen = set()
    for key, rel in graph.relations.items():
        loc = f"relation {rel.name}"
        if rel.name in seen or key != rel.name:
            issues.append(Issue("duplicate-relation", loc, "relation names must be unique"))
        seen.add(rel.name)
        missing = [t for t in (rel.src_type, rel.dst_type) if t not in counts]
        if missing:
            issues.append(Issue("unknown-type", loc, f"undeclared type(s) {missing}"))
            continue
        adj = rel.adjacency
        n_src, n_dst = counts[rel.src_type], counts[rel.dst_type]
        row_of = np.repeat(np.arange(adj.shape[0]), np.diff(adj.indptr))
        bad_rows = np.unique(row_of[row_of >= n_src])
        if bad_rows.size:
            issues.append(Issue(
                "out-of-range", loc,
                f"{rel.src_type} ids {bad_rows.tolist()} >= N_{rel.src_type}={n_src}",
            ))
        bad_cols = np.unique(adj.indices[adj.indices >= n_dst])
        if bad_cols.size:
            issues.append(Issue(
                "out-of-range", loc,
                f"{rel.dst_type} ids {bad_cols.tolist()} >= N_{rel.dst_type}={n_dst}",
            ))
        if not (bad_rows.size or bad_cols.size) and adj.shape != (n_src, n_dst):
            issues.append(Issue(
                "shape-mismatch", loc, f"adjacency {adj.shape} != ({n_src}, {n_dst})"
            ))
        same_row = np.diff(row_of) == 0
        bad = np.flatnonzero(same_row & (np.diff(adj.indices) <= 0))
        if bad.size:
            issues.append(Issue(
                "unsorted-or-duplicate", loc,
                f"row {int(row_of[bad[0]])} column indices not strictly increasing",
            ))
        if adj.data.shape[0] != adj.indices.shape[0]:
            issues.append(Issue("value-length", loc, "value array length != nnz"))

    for t, x in graph.features.items():
        loc = f"features {t}"
        if t not in counts:
            issues.append(Issue("unknown-type", loc, "features for undeclared type"))
            continue
        if x.ndim != 2 or x.shape[0] != counts[t]:
            issues.append(Issue(
                "dimension-mismatch", loc, f"{x.shape[0]} rows for {counts[t]} nodes"
            ))
        if not np.all(np.isfinite(x)):
            issues.append(Issue("non-finite", loc, "feature matrix has NaN/inf"))

    tt = graph.target_type
    if tt not in counts:
        issues.append(Issue("target", "target", f"target type {tt!r} not declared"))
    else:
        lab = graph.labels
        if lab is None or lab.shape != (counts[tt],):
            issues.append(Issue("labels", "labels", f"label vector must have {counts[tt]} entries"))
        elif np.any(lab < -1):
            issues.append(Issue("labels", "labels", "class ids must be >= 0 (-1 = unlabeled)"))
        for name, ids in graph.splits.items():
            if ids.size and (ids.min() < 0 or ids.max() >= counts[tt]):
                issues.append(Issue("out-of-range", f"split {name}", "ids outside target type"))
    return issues


# --------------------------------------------------------------------------
# I/O
# --------------------------------------------------------------------------


def _read_schema(path: Path):
    if not path.is_file():
        raise GraphLoadError(f"missing schema file: {path}")
    counts, rels, target = {}, [], None
    for lineno, raw in enumerate(path.read_text().splitlines(), 1):
        parts = raw.split("#", 1)[0].split()
        if not parts:
            continue
        kind = parts[0]
        try:
            if kind == "type" and len(parts) == 3:
                counts[parts[1]] = int(parts[2])
            elif kind == "target" and len(parts) == 2:
                target = parts[1]
            elif kind == "relation" and len(parts) == 4:
                rels.append(tuple(parts[1:]))
            else:
                raise ValueError
        except ValueError:
            raise GraphLoadError(f"{path}:{lineno}: cannot parse {raw!r}") from None
    if target is None:
        raise GraphLoadError(f"{path}: no 'target' line")
    return counts, rels, target


def _read_int_pairs(path: Path):
    text = path.read_text()
    if not text.strip():
        return np.empty((0, 2), dtype=np.int64), []
    lines = text.splitlines()
    linenos = [i for i, l in enumerate(lines, 1) if l.strip()]
    try:
        arr = np.array([l.split() for l in lines if l.strip()], dtype=np.int64)
    except ValueError:
        raise GraphLoadError(f"{path}: malformed integer pair list") from None
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise GraphLoadError(f"{path}: expected two integers per line")
    return arr, linenos


def _read_ids(path: Path):
    if not path.is_file():
        return None
    text = path.read_text().split()
    return np.array(sorted(set(int(t) for t in text)), dtype=np.int64)


def load_graph(path) -> HeteroGraph:
    root = Path(path)
    counts, rel_specs, target = _read_schema(root / "schema")
    relations = {}
    for name, src, dst in rel_specs:
        if src not in counts or dst not in counts:
            raise GraphLoadError(f"relation {name}: undeclared endpoint type")
        epath = root / f"{name}.edges"
        if not epath.is_file():
            raise GraphLoadError(f"relation {name}: edge file {epath} not found")
        pairs, linenos = _read_int_pairs(epath)
        for col, t in ((0, src), (1, dst)):
            bad = np.flatnonzero((pairs[:, col] < 0) | (pairs[:, col] >= counts[t]))
            if bad.size:
                i = int(bad[0])
                raise GraphValidationError([Issue(
                    "out-of-range", f"relation {name} line {linenos[i]}",
                    f"{t} id {int(pairs[i, col])} outside [0, {counts[t]})",
                )])
        relations[name] = Relation(
            name, src, dst, binary_csr(pairs[:, 0], pairs[:, 1], (counts[src], counts[dst]))
        )

    features = {}
    for t in counts:
        fpath = root / f"{t}.feat"
        if not fpath.is_file():
            continue
        with fpath.open() as fh:
            header = fh.readline().split()
            try:
                n, d = int(header[0]), int(header[1])
            except (IndexError, ValueError):
                raise GraphLoadError(f"{fpath}: bad header") from None
            x = np.loadtxt(fh, dtype=np.float64, ndmin=2)
        if x.size == 0:
            x = np.zeros((0, d))
        if x.shape != (n, d) or n != counts[t]:
            raise GraphValidationError([Issue(
                "dimension-mismatch", f"features {t}",
                f"header {n}x{d}, body {x.shape}, N_{t}={counts[t]}",
            )])
        features[t] = x

    labels = np.full(counts.get(target, 0), -1, dtype=np.int64)
    lpath = root / "labels"
    if not lpath.is_file():
        raise GraphLoadError(f"missing label file for target type {target}: {lpath}")
    pairs, linenos = _read_int_pairs(lpath)
    if pairs.size:
        bad = np.flatnonzero((pairs[:, 0] < 0) | (pairs[:, 0] >= labels.shape[0]))
        if bad.size:
            raise GraphValidationError([Issue(
                "out-of-range", f"labels line {linenos[int(bad[0])]}",
                f"node id {int(pairs[bad[0], 0])} outside target type",
            )])
        labels[pairs[:, 0]] = pairs[:, 1]

    splits = {}
    for s in SPLITS:
        ids = _read_ids(root / f"{s}.ids")
        if ids is not None:
            splits[s] = ids
    if "train" not in splits:
        held = set()
        for s in ("valid", "test"):
            held.update(splits.get(s, np.empty(0, np.int64)).tolist())
        splits["train"] = np.array(
            [i for i in np.flatnonzero(labels >= 0) if i not in held], dtype=np.int64
        )

    meta = {}
    mpath = root / "meta.json"
    if mpath.is_file():
        meta = json.loads(mpath.read_text())

    graph = HeteroGraph(counts, relations, target, labels, features, splits, meta)
    issues = validate(graph)
    if issues:
        raise GraphValidationError(issues)
    return graph


def _write_ids(path, ids):
    with open(path, "w") as fh:
        for i in ids:
            fh.write(f"{int(i)}\n")


def save_graph(graph: HeteroGraph, path) -> None:
    root = Path(path)
    try:
        root.mkdir(parents=True, exist_ok=True)
        lines = [f"type {t} {n}" for t, n in graph.node_counts.items()]
        lines.append(f"target {graph.target_type}")
        lines += [f"relation {r.name} {r.src_type} {r.dst_type}" for r in graph.relations.values()]
        (root / "schema").write_text("\n".join(lines) + "\n")

        for rel in graph.relations.values():
            coo = rel.adjacency.tocsr()
            coo.sort_indices()
            src = np.repeat(np.arange(coo.shape[0]), np.diff(coo.indptr))
            with open(root / f"{rel.name}.edges", "w") as fh:
                if src.size:
                    np.savetxt(fh, np.column_stack([src, coo.indices]), fmt="%d")

        for t, x in graph.features.items():
            with open(root / f"{t}.feat", "w") as fh:
                fh.write(f"{x.shape[0]} {x.shape[1]}\n")
                if x.size:
                    np.savetxt(fh, x, fmt="%.17g")

        lab_ids = np.flatnonzero(graph.labels >= 0)
        with open(root / "labels", "w") as fh:
            if lab_ids.size:
                np.savetxt(fh, np.column_stack([lab_ids, graph.labels[lab_ids]]), fmt="%d")
        for s, ids in graph.splits.items():
            _write_ids(root / f"{s}.ids", ids)
        if graph.meta:
            (root / "meta.json").write_text(json.dumps(graph.meta, sort_keys=True, indent=1) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write graph to {root}: {exc}") from exc


def graphs_equal(a: HeteroGraph, b: HeteroGraph) -> bool:
    """Structural equality: types, edges, bit-exact features, labels, splits, meta."""
    if a.node_counts != b.node_counts or a.target_type != b.target_type:
        return False
    if list(a.relations) != list(b.relations):
        return False
    for name, ra in a.relations.items():
        rb = b.relations[name]
        if (ra.src_type, ra.dst_type) != (rb.src_type, rb.dst_type):
            return False
        if ra.adjacency.shape != rb.adjacency.shape or (ra.adjacency != rb.adjacency).nnz:
            return False
    if set(a.features) != set(b.features):
        return False
    for t in a.features:
        if a.features[t].shape != b.features[t].shape:
            return False
        if a.features[t].tobytes() != b.features[t].tobytes():
            return False
    if not np.array_equal(a.labels, b.labels):
        return False
    if set(a.splits) != set(b.splits):
        return False
    if any(not np.array_equal(a.splits[s], b.splits[s]) for s in a.splits):
        return False
    return a.meta == b.meta


# --------------------------------------------------------------------------
# induction
# --------------------------------------------------------------------------


@dataclass
class HyperNode:
    """Synthesised leaf-type node standing in for a set of original leaves."""
    id: int
    leaf_type: str
    members: tuple
    anchor: tuple          # (father type, father id)
    feature: np.ndarray | None
    reverse: tuple = ()    # ((father type, father id), ...) excluding the anchor

    @property
    def fathers(self):
        return (self.anchor,) + tuple(self.reverse)

    @property
    def degree(self):
        return 1 + len(self.reverse)


def _membership(n_new, n_old, groups):
    rows = np.repeat(np.arange(n_new), [len(g) for g in groups])
    cols = np.concatenate([np.asarray(g, dtype=np.int64) for g in groups]) if groups else np.empty(0, np.int64)
    return binary_csr(rows, cols, (n_new, n_old))


def induce_subgraph(graph: HeteroGraph, kept: dict, hyper=()):
    """Materialise the condensed graph.

    ``kept`` maps a type to the original ids to retain (in output order);
    ``hyper`` lists :class:`HyperNode` objects replacing a leaf type. Each
    output node is a group of original nodes (a singleton for kept nodes)
    and an edge is emitted whenever some original edge joins two groups.

    Returns ``(graph, remap)`` where ``remap[type]`` lists, per new id, the
    original ids it stands for.
    """
    by_type = {}
    for h in hyper:
        by_type.setdefault(h.leaf_type, []).append(h)
    for t in by_type:
        if t in kept:
            raise ContractError(f"type {t} is both kept and replaced by hyper-nodes")
        by_type[t].sort(key=lambda h: h.id)
    for t in graph.node_counts:
        if t not in kept and t not in by_type:
            raise ContractError(f"type {t} appears neither in kept nor in hyper-nodes")

    groups = {}
    for t, ids in kept.items():
        ids = [int(i) for i in ids]
        n = graph.node_counts[t]
        if any(i < 0 or i >= n for i in ids) or len(set(ids)) != len(ids):
            raise ContractError(f"kept ids for {t} invalid or duplicated")
        groups[t] = [[i] for i in ids]
    for t, hs in by_type.items():
        n = graph.node_counts[t]
        for h in hs:
            if not h.members or min(h.members) < 0 or max(h.members) >= n:
                raise ContractError(f"hyper-node {h.id} of {t} has invalid members")
        groups[t] = [list(h.members) for h in hs]

    member = {t: _membership(len(g), graph.node_counts[t], g) for t, g in groups.items()}
    counts = {t: len(groups[t]) for t in graph.node_counts}

    relations = {}
    for name, rel in graph.relations.items():
        new = member[rel.src_type] @ rel.adjacency @ member[rel.dst_type].T
        new = new.tocsr()
        new.data[:] = 1.0
        new.eliminate_zeros()
        new.sort_indices()
        relations[name] = Relation(name, rel.src_type, rel.dst_type, new)

    features = {}
    for t, x in graph.features.items():
        if t in by_type:
            features[t] = np.vstack([h.feature for h in by_type[t]])
        else:
            features[t] = x[np.asarray(kept[t], dtype=np.int64)]

    tt = graph.target_type
    if tt in by_type:
        raise ContractError("the target type cannot be replaced by hyper-nodes")
    tkept = np.asarray(kept[tt], dtype=np.int64)
    labels = graph.labels[tkept] if tkept.size else np.empty(0, dtype=np.int64)
    pos = {int(o): i for i, o in enumerate(tkept)}
    splits = {
        s: np.array(sorted(pos[int(i)] for i in ids if int(i) in pos), dtype=np.int64)
        for s, ids in graph.splits.items()
    }
    remap = {t: [list(g) for g in groups[t]] for t in graph.node_counts}
    out = HeteroGraph(counts, relations, tt, labels, features, splits, dict(graph.meta))
    return out, remap
