"""k-nearest-neighbour affinity graph and its symmetric normalization."""
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

CHUNK = 1024


@dataclass(frozen=True)
class AffinityGraph:
    """Binary adjacency with unit diagonal plus D^-1/2 A D^-1/2.

    ``adjacency[i, j] == 1`` iff example i is one of the k nearest neighbours
    of example j, so column j holds j's own neighbourhood. Degrees are row
    sums of the adjacency.
    """

    adjacency: sp.csr_matrix
    normalized: sp.csr_matrix
    k: int

    @property
    def n(self):
        return self.adjacency.shape[0]

    def dense_adjacency(self):
        return self.adjacency.toarray()

    def dense_normalized(self):
        return self.normalized.toarray()


def normalize_adjacency(adjacency):
    adjacency = sp.csr_matrix(adjacency, dtype=np.float64)
    degree = np.asarray(adjacency.sum(axis=1)).ravel()
    inv_sqrt = np.where(degree > 0, 1.0 / np.sqrt(np.maximum(degree, 1e-300)), 0.0)
    scale = sp.diags(inv_sqrt)
    return (scale @ adjacency @ scale).tocsr()


def _distances(block, features, sq_norms, metric):
    if metric == "euclidean":
        d = sq_norms[:, None] + np.sum(block * block, axis=1)[None, :] - 2.0 * features @ block.T
        return np.maximum(d, 0.0).T
    if metric == "cosine":
        norms = np.sqrt(sq_norms)
        bn = np.linalg.norm(block, axis=1)
        sim = (block @ features.T) / np.maximum(bn[:, None] * norms[None, :], 1e-300)
        return 1.0 - sim
    raise ValueError(f"unknown metric {metric!r}")


def knn_indices(features, k, metric="euclidean"):
    """For every example j, its k nearest other examples (ties -> lower index).

    Returns an (n, k) integer array; row j lists the neighbours of j.
    """
    features = np.asarray(features, dtype=np.float64)
    n = features.shape[0]
    sq_norms = np.sum(features * features, axis=1)
    out = np.empty((n, k), dtype=np.int64)
    for start in range(0, n, CHUNK):
        stop = min(n, start + CHUNK)
        dist = _distances(features[start:stop], features, sq_norms, metric)
        rows = np.arange(stop - start)
        dist[rows, rows + start] = np.inf
        part = np.argpartition(dist, k - 1, axis=1)[:, :k]
        kth = dist[rows[:, None], part].max(axis=1)
        tied = (dist <= kth[:, None]).sum(axis=1) > k
        # order by (distance, index); rows tied at the boundary need a full sort
        chosen = np.take_along_axis(
            part, np.lexsort((part, dist[rows[:, None], part]), axis=-1), axis=1
        )
        for r in np.nonzero(tied)[0]:
            chosen[r] = np.argsort(dist[r], kind="stable")[:k]
        out[start:stop] = chosen
    return out


def build_knn_graph(features, k=3, metric="euclidean", symmetrize=False):
    """Affinity graph over ``features`` (n x p) by exact neighbour search.

    A single example yields the 1x1 self-loop graph. Otherwise ``1 <= k < n``.
    With ``symmetrize`` the adjacency becomes ``A or A^T``.
    """
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2:
        raise ValueError("features must be a 2-D matrix")
    if not np.all(np.isfinite(features)):
        raise ValueError("features must be finite")
    n = features.shape[0]
    if n == 1:
        adj = sp.csr_matrix(np.ones((1, 1)))
        return AffinityGraph(adj, normalize_adjacency(adj), k)
    if not 1 <= k < n:
        raise ValueError(f"k must satisfy 1 <= k < n, got k={k}, n={n}")
    nbrs = knn_indices(features, k, metric)
    rows = np.concatenate([nbrs.ravel(), np.arange(n)])
    cols = np.concatenate([np.repeat(np.arange(n), k), np.arange(n)])
    adj = sp.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(n, n))
    adj.data[:] = 1.0
    if symmetrize:
        adj = adj.maximum(adj.T).tocsr()
    adj.sort_indices()
    return AffinityGraph(adj, normalize_adjacency(adj), k)


def write_edge_list(graph, path):
    """Dump ``i j weight`` lines (normalized weights) for debugging."""
    coo = graph.normalized.tocoo()
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w") as fh:
        fh.write(f"# n={graph.n} k={graph.k}\n")
        for r, c, w in zip(coo.row[order], coo.col[order], coo.data[order]):
            fh.write(f"{r} {c} {w:.17g}\n")
