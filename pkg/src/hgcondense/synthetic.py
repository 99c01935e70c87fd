"""Small fixtures and seeded synthetic heterogeneous graphs."""
import numpy as np

from .hetgraph import HeteroGraph, Relation, binary_csr


def _graph(counts, rels, target, labels, features=None, splits=None):
    relations = {}
    for name, src, dst, edges in rels:
        e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        relations[name] = Relation(name, src, dst,
                                   binary_csr(e[:, 0], e[:, 1], (counts[src], counts[dst])))
    labels = np.asarray(labels, dtype=np.int64)
    if splits is None:
        splits = {"train": np.flatnonzero(labels >= 0)}
    splits = {k: np.asarray(v, dtype=np.int64) for k, v in splits.items()}
    return HeteroGraph(dict(counts), relations, target, labels, features or {}, splits)


def toy():
    """Papers P0-P3, authors A0-A2, subjects S0-S1; classes {0: P0,P1; 1: P2,P3}."""
    pa = [(0, 0), (0, 1), (1, 1), (2, 1), (2, 2), (3, 2)]
    ps = [(0, 0), (1, 0), (2, 1), (3, 1)]
    feats = {
        "P": np.array([[1.0, 0.0, 0.5], [0.0, 1.0, 0.25], [0.5, 0.5, 0.0], [0.0, 0.0, 1.0]]),
        "A": np.array([[1.0, 0.0], [0.0, 1.0], [0.5, 0.5]]),
        "S": np.array([[1.0, 2.0], [3.0, 4.0]]),
    }
    return _graph({"P": 4, "A": 3, "S": 2},
                  [("PA", "P", "A", pa), ("PS", "P", "S", ps)],
                  "P", [0, 0, 1, 1], feats)


def shared_leaf():
    """Target T0-T1, fathers p1,p2 (ids 0,1), leaves a1-a3 (ids 0-2);
    a2 is shared by both fathers."""
    tp = [(0, 0), (1, 1)]
    pl = [(0, 0), (0, 1), (1, 1), (1, 2)]
    feats = {
        "T": np.array([[1.0], [2.0]]),
        "F": np.array([[1.0, 0.0], [0.0, 1.0]]),
        "L": np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]),
    }
    return _graph({"T": 2, "F": 2, "L": 3},
                  [("TF", "T", "F", tp), ("FL", "F", "L", pl)],
                  "T", [0, 1], feats)


def _stratified_splits(labels, rng, fractions=(0.7, 0.1)):
    splits = {"train": [], "valid": [], "test": []}
    for c in np.unique(labels[labels >= 0]):
        ids = rng.permutation(np.flatnonzero(labels == c))
        n_tr = int(round(fractions[0] * ids.size))
        n_va = int(round(fractions[1] * ids.size))
        splits["train"].extend(ids[:n_tr])
        splits["valid"].extend(ids[n_tr:n_tr + n_va])
        splits["test"].extend(ids[n_tr + n_va:])
    return {k: np.sort(np.asarray(v, dtype=np.int64)) for k, v in splits.items()}


def random_hetero(rng, n_target=12, n_classes=2, with_leaf=True, density=0.3, feat_dim=3):
    """Random P/A/S(/T) graph: P target, A and S fathers, T a leaf under A."""
    counts = {"P": n_target, "A": int(rng.integers(3, 9)), "S": int(rng.integers(2, 6))}
    if with_leaf:
        counts["T"] = int(rng.integers(3, 10))

    def edges(n, m, p, ensure_rows=True):
        mat = rng.random((n, m)) < p
        if ensure_rows:
            for i in range(n):
                if not mat[i].any():
                    mat[i, rng.integers(m)] = True
        return np.argwhere(mat)

    rels = [("PA", "P", "A", edges(counts["P"], counts["A"], density)),
            ("PS", "P", "S", edges(counts["P"], counts["S"], density / 2))]
    if with_leaf:
        rels.append(("AT", "A", "T", edges(counts["A"], counts["T"], density)))
    labels = rng.integers(0, n_classes, size=n_target)
    for c in range(n_classes):
        labels[c] = c
    feats = {t: rng.normal(size=(n, feat_dim)) for t, n in counts.items()}
    return _graph(counts, rels, "P", labels, feats)


def planted(seed, n_target=300, n_authors=200, n_subjects=20, n_terms=120,
            n_classes=4, p_in=0.9, feat_dim=8):
    """Planted-community graph.

    Papers, authors and terms carry a community (= class for papers).
    Authors have heavy-tailed popularity; each paper picks 2-5 authors,
    from its own community with probability ``p_in``.
    """
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, n_classes, size=n_target)
    a_comm = rng.integers(0, n_classes, size=n_authors)
    pop = rng.pareto(1.5, size=n_authors) + 1.0
    s_comm = rng.integers(0, n_classes, size=n_subjects)
    t_comm = rng.integers(0, n_classes, size=n_terms)

    def pick(comm_of, weights, c, k):
        own = np.flatnonzero(comm_of == c)
        other = np.flatnonzero(comm_of != c)
        out = set()
        while len(out) < k:
            pool = own if (rng.random() < p_in and own.size) else other
            w = weights[pool] / weights[pool].sum()
            out.add(int(rng.choice(pool, p=w)))
        return out

    pa, ps = [], []
    for p in range(n_target):
        for a in pick(a_comm, pop, labels[p], int(rng.integers(2, 6))):
            pa.append((p, a))
        for s in pick(s_comm, np.ones(n_subjects), labels[p], 1):
            ps.append((p, s))
    at = []
    for a in range(n_authors):
        for t in pick(t_comm, np.ones(n_terms), a_comm[a], int(rng.integers(1, 4))):
            at.append((a, t))
    counts = {"P": n_target, "A": n_authors, "S": n_subjects, "T": n_terms}
    centers = rng.normal(size=(n_classes, feat_dim))
    feats = {
        "P": centers[labels] + 0.5 * rng.normal(size=(n_target, feat_dim)),
        "A": centers[a_comm] + 0.5 * rng.normal(size=(n_authors, feat_dim)),
        "S": rng.normal(size=(n_subjects, feat_dim)),
        "T": rng.normal(size=(n_terms, feat_dim)),
    }
    return _graph(counts,
                  [("PA", "P", "A", pa), ("PS", "P", "S", ps), ("AT", "A", "T", at)],
                  "P", labels, feats, _stratified_splits(labels, rng))


def large(seed=0, n_target=60_000, n_authors=60_000, n_subjects=500, n_terms=20_000,
          n_classes=5, authors_per_paper=10, terms_per_author=6, feat_dim=16):
    """Just over 10^6-edge graph with the same P/A/S/T schema, built vectorised."""
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, n_classes, size=n_target).astype(np.int64)
    pop = rng.pareto(3.0, size=n_authors) + 1.0
    pop /= pop.sum()
    pa_src = np.repeat(np.arange(n_target), authors_per_paper)
    pa_dst = rng.choice(n_authors, size=pa_src.size, p=pop)
    ps_src = np.arange(n_target)
    ps_dst = (labels * (n_subjects // n_classes)
              + rng.integers(0, n_subjects // n_classes, size=n_target))
    at_src = np.repeat(np.arange(n_authors), terms_per_author)
    at_dst = rng.integers(0, n_terms, size=at_src.size)
    counts = {"P": n_target, "A": n_authors, "S": n_subjects, "T": n_terms}
    feats = {t: rng.normal(size=(n, feat_dim)) for t, n in counts.items()}
    return _graph(counts,
                  [("PA", "P", "A", np.column_stack([pa_src, pa_dst])),
                   ("PS", "P", "S", np.column_stack([ps_src, ps_dst])),
                   ("AT", "A", "T", np.column_stack([at_src, at_dst]))],
                  "P", labels, feats, _stratified_splits(labels, rng))
