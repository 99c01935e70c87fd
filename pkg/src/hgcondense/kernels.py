"""Hot inner loops.

Every kernel exists twice: a ``*_nb`` loop version compiled with numba and
a ``*_np`` version built from vectorised numpy / scipy.sparse operations.
The unsuffixed names dispatch on :data:`hgcondense._numba.USE_NUMBA`,
except ``push``: at the tolerances the pipeline uses (epsilon / sqrt(n))
push is effectively global, and the synchronous sweep built on scipy's
compiled SpMV beats the scatter-heavy queue loop (see
``benchmarks/bench_kernels.py``), so both backends use the sweep.

All kernels take raw CSR arrays (``indptr``, ``indices``) with sorted
column indices inside each row.
"""
import heapq

import numpy as np
import scipy.sparse as sp

from ._numba import USE_NUMBA, njit

# ---------------------------------------------------------------------------
# greedy coverage
#
# Objective for a candidate set S drawn from ``rows``:
#     F(S) = |union of row patterns| * inv_norm + sum(bonus[S])
# Candidates are ordered by (gain, degree, -position); ``rows`` is expected
# to be sorted ascending so position order equals node-id order.
# ---------------------------------------------------------------------------


@njit(cache=True, nogil=True)
def lazy_greedy_nb(indptr, indices, n_cols, rows, bonus, degree, inv_norm, budget):
    n = rows.shape[0]
    covered = np.zeros(n_cols, dtype=np.bool_)
    stamp = np.zeros(n, dtype=np.int64)
    heap = [(0.0, 0.0, 0.0)]
    heap.pop()
    for pos in range(n):
        r = rows[pos]
        cnt = indptr[r + 1] - indptr[r]
        gain = float(cnt) * inv_norm + bonus[pos]
        heap.append((-gain, -float(degree[pos]), float(pos)))
    heapq.heapify(heap)

    sel = np.empty(budget, dtype=np.int64)
    gains = np.empty(budget, dtype=np.float64)
    sizes = np.empty(budget, dtype=np.int64)
    n_cov = 0
    rnd = 0
    while rnd < budget:
        neg_gain, neg_deg, fpos = heapq.heappop(heap)
        pos = int(fpos)
        if stamp[pos] == rnd:
            r = rows[pos]
            for k in range(indptr[r], indptr[r + 1]):
                c = indices[k]
                if not covered[c]:
                    covered[c] = True
                    n_cov += 1
            sel[rnd] = pos
            gains[rnd] = -neg_gain
            sizes[rnd] = n_cov
            rnd += 1
        else:
            r = rows[pos]
            cnt = 0
            for k in range(indptr[r], indptr[r + 1]):
                if not covered[indices[k]]:
                    cnt += 1
            gain = float(cnt) * inv_norm + bonus[pos]
            stamp[pos] = rnd
            heapq.heappush(heap, (-gain, neg_deg, fpos))
    return sel, gains, sizes


def naive_greedy_np(indptr, indices, n_cols, rows, bonus, degree, inv_norm, budget):
    """Plain greedy: every round re-scores all candidates with one SpMV."""
    n = rows.shape[0]
    n_rows = indptr.shape[0] - 1
    pat = sp.csr_matrix(
        (np.ones(indices.shape[0]), indices, indptr), shape=(n_rows, n_cols)
    )[rows]
    uncovered = np.ones(n_cols)
    alive = np.ones(n, dtype=bool)
    degree = np.asarray(degree, dtype=np.float64)
    sel = np.empty(budget, dtype=np.int64)
    gains = np.empty(budget, dtype=np.float64)
    sizes = np.empty(budget, dtype=np.int64)
    n_cov = 0
    for rnd in range(budget):
        cnt = pat @ uncovered
        gain = cnt * inv_norm + bonus
        gain = np.where(alive, gain, -np.inf)
        top = gain == gain.max()
        deg = np.where(top, degree, -np.inf)
        pos = int(np.flatnonzero(deg == deg.max())[0])
        cols = pat.indices[pat.indptr[pos]:pat.indptr[pos + 1]]
        n_cov += int(uncovered[cols].sum())
        uncovered[cols] = 0.0
        alive[pos] = False
        sel[rnd] = pos
        gains[rnd] = gain[pos]
        sizes[rnd] = n_cov
    return sel, gains, sizes


# ---------------------------------------------------------------------------
# per-row set intersections (Jaccard numerators)
# ---------------------------------------------------------------------------


@njit(cache=True, nogil=True)
def row_intersections_nb(ip_a, ix_a, ip_b, ix_b, rows):
    out = np.zeros(rows.shape[0], dtype=np.int64)
    for t in range(rows.shape[0]):
        r = rows[t]
        i, iend = ip_a[r], ip_a[r + 1]
        j, jend = ip_b[r], ip_b[r + 1]
        cnt = 0
        while i < iend and j < jend:
            a = ix_a[i]
            b = ix_b[j]
            if a == b:
                cnt += 1
                i += 1
                j += 1
            elif a < b:
                i += 1
            else:
                j += 1
        out[t] = cnt
    return out


def row_intersections_np(ip_a, ix_a, ip_b, ix_b, rows):
    n_rows = ip_a.shape[0] - 1
    n_cols = int(max(ix_a.max(initial=-1), ix_b.max(initial=-1))) + 1
    ip_a, ip_b = np.asarray(ip_a, np.int64), np.asarray(ip_b, np.int64)
    a = sp.csr_matrix((np.ones(ix_a.shape[0]), ix_a, ip_a), shape=(n_rows, n_cols))
    b = sp.csr_matrix((np.ones(ix_b.shape[0]), ix_b, ip_b), shape=(n_rows, n_cols))
    prod = a[rows].multiply(b[rows])
    return np.asarray(prod.sum(axis=1)).ravel().astype(np.int64)


# ---------------------------------------------------------------------------
# residual push for x = alpha * (I - (1-alpha) W)^-1 seed, W symmetric >= 0
#
# Invariant: exact = p + alpha (I - (1-alpha) W)^-1 r with r >= 0.
# Terminates when every residual entry is <= tol.
# ---------------------------------------------------------------------------


@njit(cache=True, nogil=True)
def push_nb(indptr, indices, data, seed, alpha, tol, max_pushes):
    n = seed.shape[0]
    p = np.zeros(n, dtype=np.float64)
    r = seed.astype(np.float64).copy()
    queue = np.empty(n, dtype=np.int64)
    inq = np.zeros(n, dtype=np.bool_)
    head = 0
    size = 0
    for u in range(n):
        if r[u] > tol:
            queue[(head + size) % n] = u
            size += 1
            inq[u] = True
    pushes = 0
    while size > 0:
        u = queue[head]
        head = (head + 1) % n
        size -= 1
        inq[u] = False
        ru = r[u]
        if ru <= tol:
            continue
        p[u] += alpha * ru
        r[u] = 0.0
        m = (1.0 - alpha) * ru
        for k in range(indptr[u], indptr[u + 1]):
            v = indices[k]
            r[v] += m * data[k]
            if r[v] > tol and not inq[v]:
                queue[(head + size) % n] = v
                size += 1
                inq[v] = True
        pushes += 1
        if pushes >= max_pushes:
            return p, r, False, pushes
    return p, r, True, pushes


def push_np(indptr, indices, data, seed, alpha, tol, max_pushes):
    """Synchronous variant: every over-threshold node pushes each sweep."""
    n = seed.shape[0]
    w = sp.csr_matrix((data, indices, indptr), shape=(n, n))
    p = np.zeros(n)
    r = np.asarray(seed, dtype=np.float64).copy()
    pushes = 0
    while True:
        active = r > tol
        k = int(active.sum())
        if k == 0:
            return p, r, True, pushes
        pushed = np.where(active, r, 0.0)
        p += alpha * pushed
        r -= pushed
        r += (1.0 - alpha) * (w @ pushed)
        pushes += k
        if pushes >= max_pushes:
            return p, r, False, pushes


push = push_np
if USE_NUMBA:
    greedy = lazy_greedy_nb
    row_intersections = row_intersections_nb
else:
    greedy = naive_greedy_np
    row_intersections = row_intersections_np
