import numpy as np
import pytest

from dpgnn.errors import InputError, ShapeError
from dpgnn.graph import build_graph, edge_homophily, normalize, read_edge_list, spmm

from .conftest import random_graph
from .oracles import dense_normalized


def test_single_edge_symmetry():
    g = build_graph([(0, 1)], 2)
    assert g.num_nodes == 2
    assert list(g.degrees) == [1, 1]
    assert g.indices.size == 2  # stored twice, once per direction


def test_dedup_idempotence():
    g1 = build_graph([(0, 1)], 2)
    g2 = build_graph([(0, 1), (1, 0), (0, 1)], 2)
    assert np.array_equal(g1.indptr, g2.indptr)
    assert np.array_equal(g1.indices, g2.indices)


def test_self_pairs_dropped():
    g = build_graph([(0, 0), (0, 1), (1, 1)], 2)
    assert g.num_edges == 1
    assert list(g.degrees) == [1, 1]


def test_out_of_range_error_names_pair():
    with pytest.raises(InputError, match=r"\(1, 5\)"):
        build_graph([(0, 1), (1, 5)], 3)


def test_csr_invariants(rng):
    g, _ = random_graph(rng, 25, 0.2)
    for i in range(g.num_nodes):
        row = g.indices[g.indptr[i] : g.indptr[i + 1]]
        assert np.all(np.diff(row) > 0)  # strictly increasing
        assert row.size == g.degrees[i]
        assert i not in row  # no self-loops in raw adjacency
        for j in row:  # symmetry
            back = g.indices[g.indptr[j] : g.indptr[j + 1]]
            assert i in back
    assert np.array_equal(g.self_loop_degrees, g.degrees + 1)


def test_normalize_two_nodes():
    adj = normalize(build_graph([(0, 1)], 2))
    dense = spmm(adj, np.eye(2))
    assert np.allclose(dense, [[0.5, 0.5], [0.5, 0.5]], atol=1e-15)


def test_normalize_isolated_node():
    adj = normalize(build_graph([], 1))
    assert np.allclose(spmm(adj, np.eye(1)), [[1.0]])


def test_normalize_matches_dense_oracle(rng):
    g, edges = random_graph(rng, 30, 0.15)
    adj = normalize(g)
    dense = spmm(adj, np.eye(30))
    assert np.abs(dense - dense_normalized(edges, 30)).max() < 1e-12


def test_normalized_adjacency_invariants(rng):
    g, _ = random_graph(rng, 20, 0.2)
    adj = normalize(g)
    dense = spmm(adj, np.eye(20))
    assert np.allclose(dense, dense.T)
    assert np.allclose(np.diag(dense), 1.0 / g.self_loop_degrees)
    vals = dense[dense != 0]
    assert np.all(vals > 0) and np.all(vals <= 1.0)


def test_spmm_identity_on_edgeless():
    adj = normalize(build_graph([], 4))
    m = np.arange(8.0).reshape(4, 2)
    assert np.array_equal(spmm(adj, m), m)


def test_spmm_hand_case():
    adj = normalize(build_graph([(0, 1)], 2))
    out = spmm(adj, np.eye(2))
    assert np.allclose(out, [[0.5, 0.5], [0.5, 0.5]], atol=1e-15)


def test_spmm_matches_dense_oracle(rng):
    g, edges = random_graph(rng, 40, 0.1)
    adj = normalize(g)
    m = rng.standard_normal((40, 6))
    expected = dense_normalized(edges, 40) @ m
    assert np.abs(spmm(adj, m) - expected).max() < 1e-12


def test_spmm_dimension_mismatch():
    adj = normalize(build_graph([(0, 1)], 2))
    with pytest.raises(ShapeError, match="spmm"):
        spmm(adj, np.ones((3, 2)))


def test_spmm_squared_matches_dense(rng):
    g, edges = random_graph(rng, 30, 0.15)
    adj = normalize(g)
    m = rng.standard_normal((30, 3))
    a_hat = dense_normalized(edges, 30)
    assert np.abs(spmm(adj, spmm(adj, m)) - a_hat @ a_hat @ m).max() < 1e-10


def test_row_sums_via_ones(rng):
    for n in (5, 17, 50):
        g, edges = random_graph(rng, n, 0.2)
        ones = np.ones((n, 1))
        expected = dense_normalized(edges, n) @ ones
        assert np.abs(spmm(normalize(g), ones) - expected).max() < 1e-12


def test_edge_homophily_all_same_class():
    g = build_graph([(0, 1), (1, 2), (0, 2)], 3)
    assert edge_homophily(g, np.zeros(3, dtype=int)) == 1.0


def test_edge_homophily_all_cross():
    g = build_graph([(0, 1)], 2)
    assert edge_homophily(g, np.array([0, 1])) == 0.0


def test_edge_homophily_zero_edges_error():
    with pytest.raises(InputError):
        edge_homophily(build_graph([], 3), np.zeros(3, dtype=int))


def test_edge_order_independence(rng):
    _, edges = random_graph(rng, 20, 0.3)
    labels = rng.integers(0, 3, size=20)
    perm = rng.permutation(len(edges))
    flipped = [(v, u) if i % 2 else (u, v) for i, (u, v) in enumerate(edges[perm])]
    g1, g2 = build_graph(edges, 20), build_graph(flipped, 20)
    assert np.array_equal(g1.indices, g2.indices)
    a1, a2 = normalize(g1), normalize(g2)
    assert np.array_equal(a1.data, a2.data)
    assert edge_homophily(g1, labels) == edge_homophily(g2, labels)


def test_read_edge_list(tmp_path):
    p = tmp_path / "edges.tsv"
    p.write_text("# comment\n0\t1\n\n2\t0\n")
    assert read_edge_list(p) == [(0, 1), (2, 0)]
    bad = tmp_path / "bad.tsv"
    bad.write_text("0\tx\n")
    with pytest.raises(InputError, match="bad.tsv:1"):
        read_edge_list(bad)
