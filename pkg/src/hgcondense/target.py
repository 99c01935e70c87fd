"""Target-type node selection.

Per meta-path and per class a greedy maximiser picks nodes for

    F(S) = |RF(S)| / N_src + sum_{v in S} (1 - Jhat(v))

where RF(S) is the union of the candidates' reachable source nodes and
Jhat(v) is the mean Jaccard similarity between v's reachable sets under
this path and under every other path sharing its endpoint types. Each
node's marginal gain at selection time is its score for that path; scores
are summed over paths and the top nodes of each class are kept.
"""
from __future__ import annotations

import math
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ContractError
from .metapath import ComposedAdjacency, pattern


def budget_for(ratio, n):
    """``ceil(ratio * n)`` capped at ``n``; guards against 0.1 * 30 = 3.0000000000000004."""
    return min(int(n), int(math.ceil(ratio * n - 1e-9)))


@dataclass
class SelectionBudget:
    ratio: float
    per_class: dict

    @property
    def total(self):
        return sum(self.per_class.values())


def class_budgets(labels, pool, ratio, total=None) -> SelectionBudget:
    """Split a node budget across classes in proportion to the pool.

    Largest-remainder apportionment (remainder ties go to the larger class,
    then the lower class id), then every class present in the pool is given
    at least one slot when the budget allows it, taken from the class with
    the largest surplus over its quota. A class never gives up a slot that
    would leave it more than one node below its quota.
    """
    if not 0 < ratio <= 1:
        raise ContractError(f"ratio {ratio} outside (0, 1]")
    pool = np.asarray(pool, dtype=np.int64)
    if pool.size == 0:
        raise ContractError("empty selection pool")
    lab = np.asarray(labels)[pool]
    lab = lab[lab >= 0]
    classes, counts = np.unique(lab, return_counts=True)
    n = int(counts.sum())
    budget = budget_for(ratio, n) if total is None else min(int(total), n)

    num = budget * counts
    base = num // n
    rem = num % n
    left = budget - int(base.sum())
    order = sorted(range(len(classes)), key=lambda i: (-rem[i], -counts[i], classes[i]))
    for i in order[:left]:
        base[i] += 1

    if budget >= len(classes):
        starving = sorted(
            (i for i in range(len(classes)) if base[i] == 0),
            key=lambda i: (-rem[i], classes[i]),
        )
        for i in starving:
            # surplus over quota, compared exactly as (base*n - num)/n; a donor
            # must sit at or above its quota so it ends within one node of it
            donors = [j for j in range(len(classes))
                      if base[j] > 1 and base[j] * n >= num[j]]
            if not donors:
                break
            j = max(donors, key=lambda j: (base[j] * n - num[j], counts[j], -classes[j]))
            base[j] -= 1
            base[i] += 1
    return SelectionBudget(ratio, {int(c): int(b) for c, b in zip(classes, base)})


def _structure(adj):
    """CSR with sorted indices and no stored zeros, reusing ``adj.matrix``
    when it already qualifies (composed matrices do)."""
    m = adj.matrix if isinstance(adj, ComposedAdjacency) else adj
    if m.has_sorted_indices and (m.data != 0).all():
        return m
    return pattern(m)


def _greedy(pat, rows, bonus, degree, inv_norm, budget, lazy=True):
    fn = kernels.greedy if lazy else kernels.naive_greedy_np
    sel, gains, sizes = fn(
        pat.indptr, pat.indices, pat.shape[1],
        rows, np.asarray(bonus, dtype=np.float64), np.asarray(degree, dtype=np.int64),
        float(inv_norm), int(budget),
    )
    return rows[sel], gains, sizes


def greedy_coverage(adj: ComposedAdjacency, pool, budget, lazy=True):
    """Greedy maximum coverage of ``adj``'s source nodes.

    Returns ``(selected ids in order, covered-set size after each step)``.
    """
    pool = np.unique(np.asarray(pool, dtype=np.int64))
    if budget > pool.size:
        raise ContractError(f"budget {budget} exceeds pool size {pool.size}")
    if budget == 0:
        return [], []
    pat = _structure(adj)
    deg = np.diff(pat.indptr)[pool]
    sel, _, sizes = _greedy(pat, pool, np.zeros(pool.size), deg, 1.0, budget, lazy)
    return sel.tolist(), sizes.tolist()


def jaccard_groups(adjs):
    """Indices of ``adjs`` grouped by (src type, dst type), in first-seen order."""
    groups = defaultdict(list)
    for i, a in enumerate(adjs):
        groups[(a.path.src_type, a.path.dst_type)].append(i)
    return list(groups.values())


def diversity_terms(adjs, nodes, pats=None):
    """``Jhat`` for every path and node: array of shape (len(adjs), len(nodes)).

    Paths alone in their endpoint group get 0.
    """
    nodes = np.asarray(nodes, dtype=np.int64)
    out = np.zeros((len(adjs), nodes.size))
    pats = pats or [_structure(a) for a in adjs]
    for group in jaccard_groups(adjs):
        if len(group) < 2:
            continue
        nnz = {i: np.diff(pats[i].indptr)[nodes] for i in group}
        for x, i in enumerate(group):
            for j in group[x + 1:]:
                a, b = pats[i], pats[j]
                inter = kernels.row_intersections(a.indptr, a.indices, b.indptr, b.indices, nodes)
                union = nnz[i] + nnz[j] - inter
                jac = np.where(union == 0, 1.0, inter / np.maximum(union, 1))
                out[i] += jac
                out[j] += jac
        for i in group:
            out[i] /= len(group) - 1
    return out


def metapath_jaccard(adjs, node):
    """Per-path ``Jhat`` of one node over a group sharing endpoint types."""
    if len({(a.path.src_type, a.path.dst_type) for a in adjs}) > 1:
        raise ContractError("meta-paths must share source and destination types")
    return diversity_terms(adjs, [node])[:, 0]


@dataclass
class PathRun:
    path: str
    cls: int
    selected: list
    gains: list
    covered: list

    @property
    def trajectory(self):
        return np.cumsum(self.gains).tolist()


@dataclass
class ScoreTable:
    paths: list
    pool: np.ndarray
    jhat: np.ndarray                  # paths x pool
    runs: list = field(default_factory=list)
    totals: dict = field(default_factory=dict)
    lone_paths: list = field(default_factory=list)

    def to_dict(self, top=20):
        best = sorted(self.totals.items(), key=lambda kv: (-kv[1], kv[0]))[:top]
        return {
            "paths": self.paths,
            "single_path_groups": self.lone_paths,
            "runs": [
                {"path": r.path, "class": r.cls, "selected": [int(v) for v in r.selected],
                 "coverage": [int(c) for c in r.covered],
                 "F": [round(f, 12) for f in r.trajectory]}
                for r in self.runs
            ],
            "top_scores": [[int(v), round(s, 12)] for v, s in best],
        }

    def format(self):
        lines = []
        for r in self.runs:
            lines.append(f"path {r.path}  class {r.cls}")
            lines.append(f"  {'step':>4} {'node':>8} {'gain':>10} {'F':>10} {'covered':>8}")
            for t, (v, g, f, c) in enumerate(zip(r.selected, r.gains, r.trajectory, r.covered)):
                lines.append(f"  {t:>4} {int(v):>8} {g:>10.4f} {f:>10.4f} {int(c):>8}")
        lines.append("aggregated scores")
        for v, s in sorted(self.totals.items(), key=lambda kv: (-kv[1], kv[0])):
            lines.append(f"  {v:>8} {s:>10.4f}")
        return "\n".join(lines)


@dataclass
class TargetSelection:
    selected: np.ndarray
    budget: SelectionBudget
    table: ScoreTable


def unified_select(graph, paths, budget: SelectionBudget, pool, lazy=True, threads=1):
    """Condense the target type: per-path, per-class greedy then top-k."""
    pool = np.unique(np.asarray(pool, dtype=np.int64))
    labels = graph.labels
    by_class = {}
    for c, b in budget.per_class.items():
        members = pool[labels[pool] == c]
        if b > 0 and members.size == 0:
            raise ContractError(f"class {c} has budget {b} but no pool members")
        if b > members.size:
            raise ContractError(f"class {c} budget {b} exceeds {members.size} pool members")
        by_class[c] = members

    pats = [_structure(p) for p in paths]
    jhat = diversity_terms(paths, pool, pats)
    at = {int(v): i for i, v in enumerate(pool)}
    groups = jaccard_groups(paths)
    lone = [paths[g[0]].path.name for g in groups if len(g) == 1]

    jobs = []
    for i, adj in enumerate(paths):
        for c, members in by_class.items():
            if budget.per_class[c] > 0:
                jobs.append((i, c, members))

    def run(job):
        i, c, members = job
        idx = np.array([at[int(v)] for v in members], dtype=np.int64)
        deg = np.diff(pats[i].indptr)[members]
        inv = 1.0 / max(paths[i].shape[1], 1)
        sel, gains, sizes = _greedy(
            pats[i], members, 1.0 - jhat[i, idx], deg, inv, budget.per_class[c], lazy
        )
        return PathRun(paths[i].path.name, c, sel.tolist(), gains.tolist(), sizes.tolist())

    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(threads) as ex:
            runs = list(ex.map(run, jobs))
    else:
        runs = [run(j) for j in jobs]

    totals = defaultdict(float)
    for r in runs:
        for v, g in zip(r.selected, r.gains):
            totals[int(v)] += g

    degree = graph.degree(graph.target_type)
    chosen = []
    for c, members in by_class.items():
        cand = [int(v) for v in members if int(v) in totals]
        cand.sort(key=lambda v: (-totals[v], -degree[v], v))
        chosen.extend(cand[:budget.per_class[c]])
    table = ScoreTable([p.path.name for p in paths], pool, jhat, runs, dict(totals), lone)
    return TargetSelection(np.array(sorted(chosen), dtype=np.int64), budget, table)
