import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from pllvle.graph import build_knn_graph, knn_indices, normalize_adjacency, write_edge_list


def brute_adjacency(x, k):
    n = len(x)
    d = ((x[:, None] - x[None]) ** 2).sum(-1)
    np.fill_diagonal(d, np.inf)
    a = np.eye(n)
    for j in range(n):
        a[np.argsort(d[:, j], kind="stable")[:k], j] = 1
    return a


def test_collinear_example():
    g = build_knn_graph(np.array([[0.0], [1.0], [10.0]]), k=1)
    assert np.array_equal(g.dense_adjacency(), [[1, 1, 0], [1, 1, 1], [0, 0, 1]])
    deg = np.array([2, 3, 1.0])
    expected = g.dense_adjacency() / np.sqrt(np.outer(deg, deg))
    assert np.allclose(g.dense_normalized(), expected)


def test_single_point():
    g = build_knn_graph(np.zeros((1, 3)), k=3)
    assert g.dense_adjacency().tolist() == [[1.0]]
    assert g.dense_normalized().tolist() == [[1.0]]


@pytest.mark.parametrize("k", [0, 5, 9])
def test_invalid_k(k):
    with pytest.raises(ValueError):
        build_knn_graph(np.random.default_rng(0).standard_normal((5, 2)), k=k)


def test_ties_prefer_lower_index():
    # points 0, 2 and 3 are equidistant from 1
    x = np.array([[0.0], [1.0], [2.0], [2.0], [10.0]])
    assert knn_indices(x, 1)[1].tolist() == [0]
    assert knn_indices(x, 2)[1].tolist() == [0, 2]


def test_matches_brute_force(gen):
    x = gen.standard_normal((60, 5))
    assert np.array_equal(build_knn_graph(x, 4).dense_adjacency(), brute_adjacency(x, 4))


def test_cosine_metric(gen):
    x = gen.standard_normal((30, 4))
    u = x / np.linalg.norm(x, axis=1, keepdims=True)
    # on the unit sphere cosine and euclidean neighbourhoods coincide
    assert np.array_equal(build_knn_graph(x, 3, "cosine").dense_adjacency(), brute_adjacency(u, 3))


def test_symmetrize(gen):
    a = build_knn_graph(gen.standard_normal((25, 3)), 2, symmetrize=True).dense_adjacency()
    assert np.array_equal(a, a.T)


def test_rejects_nonfinite():
    with pytest.raises(ValueError):
        build_knn_graph(np.array([[0.0], [np.nan], [1.0]]), 1)


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(3, 25), st.integers(1, 4)), elements=st.floats(-100, 100)),
       st.integers(1, 2))
def test_graph_invariants(x, k):
    g = build_knn_graph(x, k)
    a = g.dense_adjacency()
    assert np.all(np.diag(a) == 1)
    assert np.all(a.sum(axis=0) == k + 1)  # each column: self plus k neighbours
    norm = g.dense_normalized()
    assert np.all(norm >= 0)
    assert norm.max() <= 1.0 + 1e-12


def test_normalize_matches_formula(gen):
    a = (gen.random((6, 6)) < 0.4).astype(float) + np.eye(6)
    a = np.minimum(a, 1)
    d = a.sum(axis=1)
    assert np.allclose(normalize_adjacency(a).toarray(), a / np.sqrt(np.outer(d, d)))


def test_edge_list(tmp_path, gen):
    g = build_knn_graph(gen.standard_normal((8, 2)), 2)
    path = tmp_path / "edges.txt"
    write_edge_list(g, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "# n=8 k=2"
    assert len(lines) - 1 == g.normalized.nnz
