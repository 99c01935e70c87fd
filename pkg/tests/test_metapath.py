import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from hgcondense import synthetic
from hgcondense.errors import ContractError
from hgcondense.hetgraph import HeteroGraph, Relation, binary_csr
from hgcondense.metapath import (compose, describe, enumerate_metapaths, pattern, reachable_set,
                                 row_normalize, spgemm)
from hgcondense.oracle import dense_compose


def names(paths):
    return [p.name for p in paths]


def test_enumerate_k1(toy):
    assert names(enumerate_metapaths(toy, "P", 1)) == ["P<-A", "P<-S"]


def test_enumerate_k2(toy):
    paths = enumerate_metapaths(toy, "P", 2)
    assert names(paths) == ["P<-A", "P<-S", "P<-A<-P", "P<-S<-P"]
    assert paths[2].key == "PA PA^T"


def test_enumerate_k0_rejected(toy):
    with pytest.raises(ContractError):
        enumerate_metapaths(toy, "P", 0)


def test_enumerate_untouched_type():
    g = HeteroGraph({"P": 2, "A": 2, "X": 1},
                    {"PA": Relation("PA", "P", "A", binary_csr([0], [1], (2, 2)))},
                    "P", np.array([0, 1]))
    assert enumerate_metapaths(g, "X", 1) == []


def _random_schema(rng, n_types, n_rels):
    types = [f"T{i}" for i in range(n_types)]
    counts = {t: int(rng.integers(1, 6)) for t in types}
    rels = {}
    for k in range(n_rels):
        a, b = rng.choice(types, 2)
        m = sp.random(counts[a], counts[b], density=0.5, random_state=rng, format="csr")
        rels[f"R{k}"] = Relation(f"R{k}", a, b, binary_csr(*m.nonzero(), m.shape))
    return HeteroGraph(counts, rels, types[0], np.zeros(counts[types[0]], dtype=np.int64))


def _walk_count(g, end, k):
    # independent count: powers of the directed schema multigraph matrix
    # where every relation is one forward and one reverse arc
    types = list(g.node_counts)
    idx = {t: i for i, t in enumerate(types)}
    m = np.zeros((len(types), len(types)), dtype=np.int64)
    for r in g.relations.values():
        m[idx[r.src_type], idx[r.dst_type]] += 1
        m[idx[r.dst_type], idx[r.src_type]] += 1
    total, v = 0, np.eye(len(types), dtype=np.int64)[idx[end]]
    for _ in range(k):
        v = v @ m
        total += int(v.sum())
    return total


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6), n_types=st.integers(1, 4), n_rels=st.integers(0, 5),
       k=st.integers(1, 3))
def test_enumeration_complete(seed, n_types, n_rels, k):
    g = _random_schema(np.random.default_rng(seed), n_types, n_rels)
    paths = enumerate_metapaths(g, "T0", k)
    assert len(paths) == _walk_count(g, "T0", k)
    assert len({(p.steps, p.types) for p in paths}) == len(paths)
    assert all(p.dst_type == "T0" and 1 <= p.hops <= k for p in paths)


def test_pap_shared_authors(toy):
    pap = enumerate_metapaths(toy, "P", 2)[2]
    c = compose(toy, pap, "none").matrix.toarray()
    # P0 {A0,A1} and P1 {A1} share one author
    assert c[0, 1] == 1
    assert c[0, 0] == 2 and c[0, 3] == 0


def test_row_norm_one_hop(toy):
    pa = enumerate_metapaths(toy, "P", 1)[0]
    c = compose(toy, pa, "row").matrix
    np.testing.assert_allclose(np.asarray(c.sum(axis=1)).ravel(), 1.0)


def test_row_norm_zero_rows_stay_zero():
    m = sp.csr_matrix(np.array([[0.0, 0.0], [2.0, 2.0]]))
    r = row_normalize(m).toarray()
    np.testing.assert_array_equal(r, [[0, 0], [0.5, 0.5]])


def test_row_norm_idempotent(rng):
    for _ in range(10):
        m = sp.random(8, 6, density=0.4, random_state=rng, format="csr")
        once = row_normalize(m)
        np.testing.assert_allclose(row_normalize(once).toarray(), once.toarray(), atol=1e-15)


def test_zero_step_absorbs(toy):
    toy.relations["PS"] = Relation("PS", "P", "S", sp.csr_matrix((4, 2)))
    psp = [p for p in enumerate_metapaths(toy, "P", 2) if p.name == "P<-S<-P"][0]
    for norm in ("none", "row", "sym"):
        assert compose(toy, psp, norm).nnz == 0


def test_compose_patterns_match_dense(rng):
    for _ in range(10):
        g = synthetic.random_hetero(rng)
        for p in enumerate_metapaths(g, "P", 3):
            dense = dense_compose([
                (g.relations[r].adjacency.T if t else g.relations[r].adjacency).toarray()
                for r, t in p.steps])
            for norm in ("none", "row", "sym"):
                got = pattern(compose(g, p, norm)).toarray() != 0
                np.testing.assert_array_equal(got, dense)


def test_spgemm_row_blocks_match(rng):
    a = sp.random(40, 30, density=0.3, random_state=rng, format="csr")
    b = sp.random(30, 50, density=0.3, random_state=rng, format="csr")
    np.testing.assert_allclose(spgemm(a, b, block_nnz=25).toarray(), (a @ b).toarray())


def test_masks_drop_intermediates(toy):
    pap = enumerate_metapaths(toy, "P", 2)[2]
    c = compose(toy, pap, "none", masks={"A": np.array([True, False, True])}).matrix.toarray()
    # without A1, P0 and P1 no longer meet
    assert c[0, 1] == 0 and c[2, 3] == 1


def test_reachable_sets(toy):
    pa = compose(toy, enumerate_metapaths(toy, "P", 1)[0])
    assert reachable_set(pa, 0) == {0, 1}
    with pytest.raises(ContractError):
        reachable_set(pa, 4)


def test_reachable_isolated_and_full():
    g = HeteroGraph({"P": 3, "A": 2},
                    {"PA": Relation("PA", "P", "A", binary_csr([0, 0, 1, 1], [0, 1, 0, 1], (3, 2)))},
                    "P", np.zeros(3, dtype=np.int64))
    c = compose(g, enumerate_metapaths(g, "P", 1)[0])
    assert reachable_set(c, 2) == set()
    assert reachable_set(c, 0) == reachable_set(c, 1) == {0, 1}


def test_bad_norm(toy):
    with pytest.raises(ContractError):
        compose(toy, enumerate_metapaths(toy, "P", 1)[0], "col")


def test_describe_lists_paths(toy):
    text = describe([compose(toy, p) for p in enumerate_metapaths(toy, "P", 2)])
    assert len(text.splitlines()) == 5
    assert "P<-S<-P" in text
