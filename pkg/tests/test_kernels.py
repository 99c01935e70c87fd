import os
import subprocess
import sys

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from hgcondense import _numba, kernels
from hgcondense.auxiliary import bipartite_lift
from hgcondense.metapath import sym_normalize

needs_numba = pytest.mark.skipif(not _numba.HAVE_NUMBA, reason="numba not installed")


def random_pattern(rng, n, m, p):
    mat = sp.csr_matrix((rng.random((n, m)) < p).astype(float))
    mat.sort_indices()
    return mat


@needs_numba
@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.integers(1, 30), m=st.integers(1, 20),
       p=st.floats(0.0, 0.6), frac=st.floats(0.1, 1.0))
def test_greedy_numba_matches_numpy(seed, n, m, p, frac):
    rng = np.random.default_rng(seed)
    pat = random_pattern(rng, n, m, p)
    rows = np.sort(rng.choice(n, size=max(1, int(frac * n)), replace=False)).astype(np.int64)
    # coarse bonuses so exact ties occur
    bonus = rng.integers(0, 3, size=rows.size) / 2.0
    deg = np.diff(pat.indptr)[rows].astype(np.int64)
    budget = int(rng.integers(1, rows.size + 1))
    args = (pat.indptr, pat.indices, m, rows, bonus, deg, 1.0 / m, budget)
    a = kernels.lazy_greedy_nb(*args)
    b = kernels.naive_greedy_np(*args)
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_allclose(a[1], b[1], rtol=0, atol=1e-12)
    np.testing.assert_array_equal(a[2], b[2])


def test_greedy_tie_break_lower_id():
    pat = sp.csr_matrix(np.eye(3))
    rows = np.arange(3)
    for fn in (kernels.lazy_greedy_nb, kernels.naive_greedy_np):
        sel, _, _ = fn(pat.indptr, pat.indices, 3, rows, np.zeros(3), np.ones(3, dtype=np.int64), 1.0, 3)
        assert sel.tolist() == [0, 1, 2]


def test_greedy_tie_break_degree():
    # equal gain (bonus compensates) but row 1 has higher degree
    pat = sp.csr_matrix(np.array([[1.0, 0, 0], [1.0, 1.0, 0]]))
    for fn in (kernels.lazy_greedy_nb, kernels.naive_greedy_np):
        sel, _, _ = fn(pat.indptr, pat.indices, 3, np.arange(2), np.array([1.0, 0.0]),
                       np.array([1, 2]), 1.0, 1)
        assert sel.tolist() == [1]


@needs_numba
@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.integers(1, 25), m=st.integers(1, 25))
def test_intersections_match(seed, n, m):
    rng = np.random.default_rng(seed)
    a = random_pattern(rng, n, m, 0.3)
    b = random_pattern(rng, n, m, 0.3)
    rows = np.arange(n, dtype=np.int64)
    ref = np.asarray(a.multiply(b).sum(axis=1)).ravel()
    np.testing.assert_array_equal(kernels.row_intersections_nb(a.indptr, a.indices, b.indptr, b.indices, rows), ref)
    np.testing.assert_array_equal(kernels.row_intersections_np(a.indptr, a.indices, b.indptr, b.indices, rows), ref)


@needs_numba
@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.integers(2, 40))
def test_push_variants_within_tolerance(seed, n):
    rng = np.random.default_rng(seed)
    lift = bipartite_lift(sym_normalize(random_pattern(rng, n, n // 2 + 1, 0.2)))
    seed_vec = np.zeros(lift.shape[0])
    seed_vec[0] = 1.0
    tol = 1e-7
    args = (lift.indptr.astype(np.int64), lift.indices.astype(np.int64), lift.data,
            seed_vec, 0.15, tol, 10**7)
    pa, ra, oka, _ = kernels.push_nb(*args)
    pb, rb, okb, _ = kernels.push_np(*args)
    assert oka and okb
    assert ra.max() <= tol and rb.max() <= tol
    exact = 0.15 * np.linalg.solve(np.eye(lift.shape[0]) - 0.85 * lift.toarray(), seed_vec)
    bound = tol * np.sqrt(lift.shape[0])
    assert np.abs(pa - exact).max() <= bound and np.abs(pb - exact).max() <= bound


def test_env_flag_selects_numpy():
    env = dict(os.environ, HGCONDENSE_DISABLE_NUMBA="1")
    out = subprocess.run(
        [sys.executable, "-c",
         "from hgcondense import _numba, kernels; "
         "print(_numba.backend(), kernels.greedy is kernels.naive_greedy_np)"],
        env=env, capture_output=True, text=True, check=True)
    assert out.stdout.split() == ["numpy", "True"]
