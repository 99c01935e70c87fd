"""Time the numba kernels against their numpy fallbacks.

    python benchmarks/bench_kernels.py [--scale 1.0] [--repeat 3]

Inputs come from the synthetic large graph (scaled), so the shapes are the
ones the pipeline actually feeds the kernels.
"""
import argparse
import time

import numpy as np

from hgcondense import kernels, synthetic
from hgcondense.auxiliary import bipartite_lift
from hgcondense.metapath import compose, enumerate_metapaths, sym_normalize


def best_of(fn, repeat):
    out, times = None, []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--scale", type=float, default=0.25)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--budget", type=int, default=500)
    args = ap.parse_args()

    s = args.scale
    g = synthetic.large(seed=0, n_target=int(60_000 * s), n_authors=int(60_000 * s),
                        n_terms=int(20_000 * s))
    paths = {p.name: compose(g, p) for p in enumerate_metapaths(g, "P", 2)}
    pap, pa = paths["P<-A<-P"].matrix, paths["P<-A"].matrix
    rows = np.arange(pap.shape[0], dtype=np.int64)
    bonus = np.zeros(rows.size)
    deg = np.diff(pap.indptr).astype(np.int64)
    budget = min(args.budget, rows.size)
    lift = bipartite_lift(sym_normalize(pa))
    seed = np.zeros(lift.shape[0])
    seed[: pa.shape[0] // 10] = 1.0
    one = np.zeros(lift.shape[0])
    one[0] = 1.0
    ip, ix = lift.indptr.astype(np.int64), lift.indices.astype(np.int64)

    cases = {
        "greedy": (
            lambda: kernels.lazy_greedy_nb(pap.indptr, pap.indices, pap.shape[1], rows, bonus, deg,
                                           1.0 / pap.shape[1], budget),
            lambda: kernels.naive_greedy_np(pap.indptr, pap.indices, pap.shape[1], rows, bonus, deg,
                                            1.0 / pap.shape[1], budget),
        ),
        "row_intersections": (
            lambda: kernels.row_intersections_nb(pap.indptr, pap.indices, pap.indptr, pap.indices, rows),
            lambda: kernels.row_intersections_np(pap.indptr, pap.indices, pap.indptr, pap.indices, rows),
        ),
        "push (10% seeds)": (
            lambda: kernels.push_nb(ip, ix, lift.data, seed, 0.15, 1e-7, 10**9),
            lambda: kernels.push_np(ip, ix, lift.data, seed, 0.15, 1e-7, 10**9),
        ),
        "push (1 seed)": (
            lambda: kernels.push_nb(ip, ix, lift.data, one, 0.15, 1e-7, 10**9),
            lambda: kernels.push_np(ip, ix, lift.data, one, 0.15, 1e-7, 10**9),
        ),
    }
    print(f"graph: {g.n_edges()} edges, PAP nnz {pap.nnz}, lift n={lift.shape[0]}")
    print(f"{'kernel':<20} {'numba s':>10} {'numpy s':>10} {'speedup':>8}  agree")
    for name, (nb, npy) in cases.items():
        nb()                                         # compile / warm cache
        t_nb, a = best_of(nb, args.repeat)
        t_np, b = best_of(npy, args.repeat)
        if name == "greedy":
            agree = np.array_equal(a[0], b[0])
        elif name.startswith("push"):
            agree = np.abs(a[0] - b[0]).max() < 1e-6
        else:
            agree = np.array_equal(a, b)
        print(f"{name:<20} {t_nb:>10.4f} {t_np:>10.4f} {t_np / t_nb:>8.1f}  {agree}")


if __name__ == "__main__":
    main()
