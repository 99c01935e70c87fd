"""Brute-force references for tests and acceptance checks.

Nothing in the engine imports this module. Everything here works on dense
numpy arrays and Python sets and deliberately shares no code with the
sparse/greedy/push paths it is used to check.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import OracleRefusal

COMBINATION_CAP = 10**6


@dataclass
class OracleReport:
    instance: str
    oracle: float
    engine: float
    bound: float
    passed: bool

    @property
    def ratio(self):
        return self.engine / self.oracle if self.oracle else 1.0


def dense_compose(steps):
    """Boolean chain product of dense matrices."""
    if not steps:
        raise ValueError("empty chain")
    acc = np.asarray(steps[0]) != 0
    for m in steps[1:]:
        m = np.asarray(m) != 0
        if acc.shape[1] != m.shape[0]:
            raise ValueError(f"dimension mismatch {acc.shape} x {m.shape}")
        acc = (acc.astype(np.int64) @ m.astype(np.int64)) > 0
    return acc


def dense_sym_lift(block):
    """Dense ``D^-1/2 [[0,B],[B^T,0]] D^-1/2`` from a rectangular pattern."""
    b = (np.asarray(block) != 0).astype(float)
    nt, ns = b.shape
    a = np.zeros((nt + ns, nt + ns))
    a[:nt, nt:] = b
    a[nt:, :nt] = b.T
    d = a.sum(axis=1)
    inv = np.zeros_like(d)
    inv[d > 0] = 1.0 / np.sqrt(d[d > 0])
    return a * inv[:, None] * inv[None, :]


def dense_ppr(a, alpha):
    """``alpha (I - (1-alpha) A)^-1`` by a dense solve against the identity."""
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    if n > 500:
        raise OracleRefusal(f"dense PPR limited to n <= 500, got {n}")
    system = np.eye(n) - (1.0 - alpha) * a
    try:
        return alpha * np.linalg.solve(system, np.eye(n))
    except np.linalg.LinAlgError as exc:
        raise ValueError(f"singular PPR system: {exc}") from exc


def row_sets(reach):
    reach = np.asarray(reach) != 0
    return [set(np.flatnonzero(row).tolist()) for row in reach]


def jaccard(a, b):
    u = a | b
    return 1.0 if not u else len(a & b) / len(u)


def jhat_sets(sets_by_path, group, node):
    """Mean Jaccard of ``node``'s reachable set under each path in ``group``
    against the other paths of the group."""
    out = {}
    for i in group:
        if len(group) == 1:
            out[i] = 0.0
            continue
        tot = sum(jaccard(sets_by_path[i][node], sets_by_path[j][node]) for j in group if j != i)
        out[i] = tot / (len(group) - 1)
    return out


def objective(sets_by_path, n_src, groups, subset, paths=None):
    """Sum over ``paths`` of coverage/n_src + sum of (1 - Jhat)."""
    paths = range(len(sets_by_path)) if paths is None else paths
    group_of = {i: g for g in groups for i in g}
    total = 0.0
    for i in paths:
        cov = set()
        div = 0.0
        for v in subset:
            cov |= sets_by_path[i][v]
            div += 1.0 - jhat_sets(sets_by_path, group_of[i], v)[i]
        total += len(cov) / n_src[i] + div
    return total


def brute_force_F(reach, pool, budget, groups=None, labels=None, class_budget=None, paths=None):
    """Exhaustive maximiser of the summed objective.

    ``reach`` is a list of dense (target x source) reachability matrices.
    With ``labels``/``class_budget`` the subset must contain exactly
    ``class_budget[c]`` nodes of class ``c``. Returns ``(subset, value)``.
    """
    pool = sorted(int(v) for v in pool)
    sets_by_path = [row_sets(r) for r in reach]
    n_src = [np.asarray(r).shape[1] for r in reach]
    groups = groups or [[i] for i in range(len(reach))]

    if class_budget is None:
        n_comb = math.comb(len(pool), budget)
        if n_comb > COMBINATION_CAP:
            raise OracleRefusal(f"C({len(pool)},{budget}) = {n_comb} exceeds cap")
        candidates = itertools.combinations(pool, budget)
    else:
        per_class = []
        n_comb = 1
        for c, b in sorted(class_budget.items()):
            members = [v for v in pool if labels[v] == c]
            n_comb *= math.comb(len(members), b)
            per_class.append(list(itertools.combinations(members, b)))
        if n_comb > COMBINATION_CAP:
            raise OracleRefusal(f"{n_comb} class-respecting subsets exceed cap")
        candidates = (sum(parts, ()) for parts in itertools.product(*per_class))

    best, best_val = None, -math.inf
    for subset in candidates:
        val = objective(sets_by_path, n_src, groups, subset, paths)
        if val > best_val + 1e-12:
            best, best_val = tuple(sorted(subset)), val
    return best, best_val


def diminishing_returns_holds(sets, s, w, v):
    """Coverage marginal gain of ``v`` on ``s`` is >= its gain on ``w``
    (``s`` subset of ``w``), in exact set arithmetic."""
    def cov(nodes):
        out = set()
        for x in nodes:
            out |= sets[x]
        return len(out)
    return cov(set(s) | {v}) - cov(s) >= cov(set(w) | {v}) - cov(w)


def two_hop_father_pairs(graph_fl):
    """Father pairs sharing at least one leaf in a dense father x leaf matrix."""
    m = (np.asarray(graph_fl) != 0).astype(np.int64)
    co = m @ m.T
    n = co.shape[0]
    return {(i, j) for i in range(n) for j in range(i + 1, n) if co[i, j] > 0}
