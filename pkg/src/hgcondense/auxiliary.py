"""Condensation of the non-target node types.

Father types (bridges to the target type) keep the nodes with the highest
personalized-PageRank mass received from the kept target nodes. Leaf
types are replaced by hyper-nodes: one per kept father node, carrying the
mean feature of its leaf neighbours plus reverse edges to every other
kept father touching one of those leaves.
"""
from __future__ import annotations

import heapq
import logging
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from . import kernels
from .errors import ContractError, HierarchyError, PPRConvergenceError
from .hetgraph import HyperNode
from .metapath import ComposedAdjacency, compose, enumerate_metapaths, pattern, sym_normalize
from .target import budget_for

log = logging.getLogger(__name__)

ROLES = ("root", "father", "leaf")


# --------------------------------------------------------------------------
# type hierarchy
# --------------------------------------------------------------------------


@dataclass
class TypeHierarchy:
    roles: dict
    distance: dict
    multilevel: list = field(default_factory=list)

    def of(self, role):
        return sorted((t for t, r in self.roles.items() if r == role),
                      key=lambda t: (self.distance.get(t, 0), t))

    def format(self):
        lines = []
        for t in sorted(self.roles, key=lambda t: (self.distance.get(t, 0), t)):
            note = "  (separates deeper types)" if t in self.multilevel else ""
            lines.append(f"{t}:{self.roles[t]}  distance={self.distance.get(t, -1)}{note}")
        return "\n".join(lines)


def _bfs(adj, start, removed=None):
    dist = {start: 0}
    q = deque([start])
    while q:
        u = q.popleft()
        for v in sorted(adj[u]):
            if v != removed and v not in dist:
                dist[v] = dist[u] + 1
                q.append(v)
    return dist


def classify_hierarchy(graph, overrides=None) -> TypeHierarchy:
    """Root = target; father = adjacent to the root or a cut vertex between
    some type and the root; every other type is a leaf."""
    adj = graph.schema_neighbors()
    root = graph.target_type
    dist = _bfs(adj, root)
    for t in graph.node_counts:
        if t not in dist:
            raise HierarchyError(f"type {t} is not connected to target type {root}")
    roles = {root: "root"}
    multilevel = []
    for t in graph.node_counts:
        if t == root:
            continue
        if dist[t] == 1:
            roles[t] = "father"
            continue
        reach = _bfs(adj, root, removed=t)
        if len(reach) < len(dist) - 1:
            roles[t] = "father"
            multilevel.append(t)
        else:
            roles[t] = "leaf"
    if overrides:
        for t, role in overrides.items():
            if t not in graph.node_counts or role not in ROLES:
                raise HierarchyError(f"bad role override {t}={role}")
            if (t == root) != (role == "root"):
                raise HierarchyError("only the target type may be root")
            roles[t] = role
    return TypeHierarchy(roles, dist, multilevel)


def read_role_overrides(path):
    out = {}
    with open(path) as fh:
        for raw in fh:
            parts = raw.split("#", 1)[0].split()
            if not parts:
                continue
            if len(parts) != 2:
                raise HierarchyError(f"{path}: expected '<type> <role>', got {raw.strip()!r}")
            out[parts[0]] = parts[1]
    return out


# --------------------------------------------------------------------------
# personalized PageRank on the bipartite lift
# --------------------------------------------------------------------------


@dataclass
class InfluenceMatrix:
    matrix: sp.csr_matrix      # target rows x source cols
    alpha: float
    epsilon: float
    mode: str


def bipartite_lift(block):
    """Square symmetric ``[[0, B], [B^T, 0]]`` from a rectangular block."""
    b = sp.csr_matrix(block)
    nt, ns = b.shape
    lift = sp.bmat([[sp.csr_matrix((nt, nt)), b], [b.T, sp.csr_matrix((ns, ns))]], format="csr")
    lift.sort_indices()
    return lift


def _sym_block(adj):
    if isinstance(adj, ComposedAdjacency) and adj.norm == "sym":
        return adj.matrix
    m = adj.matrix if isinstance(adj, ComposedAdjacency) else sp.csr_matrix(adj)
    return sym_normalize(m)


def _max_pushes(lift):
    return max(10_000_000, 200 * (lift.nnz + lift.shape[0]))


def ppr_push(lift, seed, alpha, epsilon):
    """``alpha (I - (1-alpha) W)^-1 seed`` for symmetric-normalised ``W``.

    Every residual is driven below ``epsilon / sqrt(n)``, so the residual
    2-norm is at most ``epsilon``; the operator has 2-norm <= 1, which bounds
    every entry's error by ``epsilon``.
    """
    n = lift.shape[0]
    tol = epsilon / np.sqrt(max(n, 1))
    p, r, ok, pushes = kernels.push(
        lift.indptr.astype(np.int64), lift.indices.astype(np.int64),
        lift.data.astype(np.float64), np.asarray(seed, dtype=np.float64),
        float(alpha), float(tol), int(_max_pushes(lift)),
    )
    if not ok:
        raise PPRConvergenceError(float(np.linalg.norm(r)), pushes)
    return p


def ppr_influence(adj, alpha=0.15, epsilon=1e-4, mode="push") -> InfluenceMatrix:
    """Target x source block of ``alpha (I - (1-alpha) A_sym)^-1``.

    ``push`` runs one residual push per target row at ``epsilon/2`` and
    drops entries below ``epsilon/2``, so each entry is within ``epsilon``
    of the exact value.
    """
    if not 0 < alpha < 1:
        raise ContractError("alpha must lie in (0, 1)")
    block = _sym_block(adj)
    nt, ns = block.shape
    lift = bipartite_lift(block)
    n = nt + ns
    if mode == "exact":
        system = (sp.identity(n, format="csc") - (1 - alpha) * lift).tocsc()
        rhs = np.zeros((n, nt))
        rhs[np.arange(nt), np.arange(nt)] = alpha
        sol = splu(system).solve(rhs) if n else rhs
        # symmetric operator: column t holds row t of the inverse
        return InfluenceMatrix(sp.csr_matrix(sol[nt:, :].T), alpha, 0.0, mode)
    if mode != "push":
        raise ContractError(f"unknown PPR mode {mode!r}")
    half = epsilon / 2
    rows, cols, vals = [], [], []
    seed = np.zeros(n)
    for t in range(nt):
        seed[t] = 1.0
        p = ppr_push(lift, seed, alpha, half)
        seed[t] = 0.0
        src = p[nt:]
        keep = np.flatnonzero(src >= half)
        rows.append(np.full(keep.size, t))
        cols.append(keep)
        vals.append(src[keep])
    if nt:
        m = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(nt, ns))
    else:
        m = sp.csr_matrix((nt, ns))
    return InfluenceMatrix(m, alpha, epsilon, mode)


def influence_scores(adj, seeds, alpha=0.15, epsilon=1e-4, mode="push"):
    """Column sums of the influence block over the ``seeds`` rows.

    By linearity this is one solve with the seed indicator as right-hand
    side instead of one solve per seed.
    """
    block = _sym_block(adj)
    nt, ns = block.shape
    lift = bipartite_lift(block)
    b = np.zeros(nt + ns)
    b[np.asarray(seeds, dtype=np.int64)] = 1.0
    if mode == "exact":
        system = (sp.identity(nt + ns, format="csc") - (1 - alpha) * lift).tocsc()
        x = alpha * splu(system).solve(b)
    else:
        x = ppr_push(lift, b, alpha, epsilon)
    return x[nt:]


# --------------------------------------------------------------------------
# father selection
# --------------------------------------------------------------------------


@dataclass
class FatherSelection:
    node_type: str
    selected: np.ndarray
    scores: np.ndarray
    paths: list


def rank_top(scores, degree, k):
    """Indices of the ``k`` best by (score desc, degree desc, id asc)."""
    ids = np.arange(scores.shape[0])
    order = np.lexsort((ids, -degree, -scores))
    return order[:k]


def select_father(graph, paths, kept_targets, budget, alpha=0.15, epsilon=1e-4,
                  mode="push", importance="ppr", node_type=None, threads=1):
    """Keep the ``budget`` father nodes with most influence on the kept targets.

    ``paths`` are composed meta-paths from the father type to the target;
    their influence blocks are summed and each column is summed over the
    kept target rows.
    """
    node_type = node_type or paths[0].path.src_type
    n = graph.node_counts[node_type]
    if budget > n:
        raise ContractError(f"budget {budget} exceeds {n} nodes of type {node_type}")
    kept_targets = np.asarray(kept_targets, dtype=np.int64)

    def one(adj):
        if importance == "degree":
            pat = pattern(adj)
            return np.asarray(pat[kept_targets].sum(axis=0)).ravel()
        if importance != "ppr":
            raise ContractError(f"unknown importance measure {importance!r}")
        return influence_scores(adj, kept_targets, alpha, epsilon, mode)

    if threads > 1 and len(paths) > 1:
        with ThreadPoolExecutor(threads) as ex:
            parts = list(ex.map(one, paths))
    else:
        parts = [one(p) for p in paths]
    scores = np.zeros(n)
    for s in parts:
        scores += s
    chosen = rank_top(scores, graph.degree(node_type), budget)
    return FatherSelection(node_type, chosen.astype(np.int64), scores,
                           [p.path.name for p in paths])


# --------------------------------------------------------------------------
# leaf synthesis
# --------------------------------------------------------------------------


@dataclass
class LeafSynthesis:
    leaf_type: str
    hyper: list
    groups: int
    budget: int
    merges: list
    warning: str | None = None


def _mean_feature(graph, leaf_type, members):
    x = graph.features.get(leaf_type)
    if x is None:
        return None
    return x[np.asarray(members, dtype=np.int64)].mean(axis=0)


def synthesize_leaf(graph, hierarchy, leaf_type, kept, budget):
    """Hyper-nodes for ``leaf_type`` anchored on kept father nodes.

    ``kept`` maps father types to their kept ids. Groups beyond ``budget``
    are merged lowest-degree first into the hyper-node sharing the most
    fathers (ties: smaller combined membership, then lower id).
    """
    if hierarchy.roles.get(leaf_type) != "leaf":
        raise ContractError(f"{leaf_type} is not a leaf type")
    if budget < 1:
        raise ContractError("leaf budget must be >= 1")
    ftypes = [t for t in hierarchy.of("father")
              if t in kept and graph.relations_between(t, leaf_type)]

    # leaf -> kept-father incidence, columns enumerate (type, id) pairs
    fkeys = []
    blocks = []
    for ft in ftypes:
        ids = np.sort(np.asarray(kept[ft], dtype=np.int64))
        nb = graph.neighbors_matrix(ft, leaf_type)[ids]
        blocks.append(nb)
        fkeys.extend((ft, int(i)) for i in ids)
    if not fkeys:
        msg = f"leaf type {leaf_type} has no edges to any kept father"
        log.warning(msg)
        return LeafSynthesis(leaf_type, [], 0, budget, [], msg)
    fl = sp.vstack(blocks, format="csr")          # kept fathers x leaves
    fl.sort_indices()
    lf = fl.T.tocsr()
    lf.sort_indices()

    members, fathers, anchors = [], [], []
    for k, key in enumerate(fkeys):
        mem = fl.indices[fl.indptr[k]:fl.indptr[k + 1]]
        if mem.size == 0:
            continue
        fs = np.unique(np.concatenate([lf.indices[lf.indptr[m]:lf.indptr[m + 1]] for m in mem]))
        members.append(set(mem.tolist()))
        fathers.append(set(fs.tolist()))
        anchors.append(k)
    n_groups = len(members)
    if n_groups == 0:
        msg = f"kept fathers have no {leaf_type} neighbours"
        log.warning(msg)
        return LeafSynthesis(leaf_type, [], 0, budget, [], msg)

    alive = [True] * n_groups
    version = [0] * n_groups
    by_father = {}
    for h, fs in enumerate(fathers):
        for f in fs:
            by_father.setdefault(f, set()).add(h)
    deg_heap = [(len(fathers[h]), len(members[h]), h, 0) for h in range(n_groups)]
    heapq.heapify(deg_heap)
    size_heap = [(len(members[h]), h, 0) for h in range(n_groups)]
    heapq.heapify(size_heap)

    def smallest_other(h):
        # disjoint father sets imply disjoint members, so the smallest
        # combined membership is simply the smallest other hyper-node
        held, found = [], None
        while size_heap:
            entry = heapq.heappop(size_heap)
            _, q, qv = entry
            if not alive[q] or qv != version[q]:
                continue
            held.append(entry)
            if q != h:
                found = q
                break
        for entry in held:
            heapq.heappush(size_heap, entry)
        return found

    merges = []
    count = n_groups
    while count > budget:
        d, s, h, ver = heapq.heappop(deg_heap)
        if not alive[h] or ver != version[h]:
            continue
        cand = set()
        for f in fathers[h]:
            cand |= by_father[f]
        cand.discard(h)
        if cand:
            p = min(cand, key=lambda q: (-len(fathers[q] & fathers[h]),
                                         len(members[q] | members[h]), q))
            shared = len(fathers[p] & fathers[h])
        else:
            p = smallest_other(h)
            shared = 0
        merges.append({"merged": anchors[h], "into": anchors[p], "shared_fathers": shared,
                       "members": len(members[h] | members[p])})
        alive[h] = False
        for f in fathers[h]:
            by_father[f].discard(h)
            by_father[f].add(p)
        members[p] |= members[h]
        fathers[p] |= fathers[h]
        version[p] += 1
        heapq.heappush(deg_heap, (len(fathers[p]), len(members[p]), p, version[p]))
        heapq.heappush(size_heap, (len(members[p]), p, version[p]))
        count -= 1

    hyper = []
    for h in range(n_groups):
        if not alive[h]:
            continue
        mem = tuple(sorted(members[h]))
        anchor = fkeys[anchors[h]]
        rev = tuple(fkeys[f] for f in sorted(fathers[h]) if f != anchors[h])
        hyper.append(HyperNode(len(hyper), leaf_type, mem, anchor,
                               _mean_feature(graph, leaf_type, mem), rev))
    for m in merges:
        m["merged"] = list(fkeys[m["merged"]])
        m["into"] = list(fkeys[m["into"]])
    return LeafSynthesis(leaf_type, hyper, n_groups, budget, merges)


# --------------------------------------------------------------------------
# orchestration of the non-target types
# --------------------------------------------------------------------------


@dataclass
class OtherTypesPlan:
    kept: dict
    hyper: list
    fathers: dict
    leaves: dict
    warnings: list


def father_paths(graph, hierarchy, node_type, hops, masks=None):
    d = hierarchy.distance[node_type]
    all_paths = enumerate_metapaths(graph, graph.target_type, max(hops, d))
    paths = [p for p in all_paths if p.src_type == node_type]
    use_masks = masks if d >= 2 else None
    return [compose(graph, p, "sym", masks=use_masks) for p in paths]


def condense_other_types(graph, hierarchy, kept_targets, ratio, hops=2, alpha=0.15,
                         epsilon=1e-4, mode="push", importance="ppr", threads=1):
    if len(kept_targets) == 0:
        raise ContractError("no kept target nodes")
    kept, fathers, leaves, warnings = {}, {}, {}, []
    masks = {graph.target_type: _mask(graph, graph.target_type, kept_targets)}
    for ft in hierarchy.of("father"):
        paths = father_paths(graph, hierarchy, ft, hops, masks)
        budget = budget_for(ratio, graph.node_counts[ft])
        if paths:
            sel = select_father(graph, paths, kept_targets, budget, alpha, epsilon,
                                mode, importance, node_type=ft, threads=threads)
        else:
            warnings.append(f"father type {ft}: no meta-path to the target, ranked by degree")
            sel = FatherSelection(ft, rank_top(np.zeros(graph.node_counts[ft]),
                                               graph.degree(ft), budget), np.zeros(0), [])
        fathers[ft] = sel
        kept[ft] = np.sort(sel.selected)
        masks[ft] = _mask(graph, ft, kept[ft])
    for lt in hierarchy.of("leaf"):
        budget = budget_for(ratio, graph.node_counts[lt])
        syn = synthesize_leaf(graph, hierarchy, lt, kept, max(budget, 1))
        leaves[lt] = syn
        if syn.warning:
            warnings.append(syn.warning)
    hyper = [h for s in leaves.values() for h in s.hyper]
    for lt, syn in leaves.items():
        if not syn.hyper:
            kept[lt] = np.empty(0, dtype=np.int64)
    return OtherTypesPlan(kept, hyper, fathers, leaves, warnings)


def _mask(graph, t, ids):
    m = np.zeros(graph.node_counts[t], dtype=bool)
    m[np.asarray(ids, dtype=np.int64)] = True
    return m
