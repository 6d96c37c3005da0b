"""Exact symmetric kNN graph and the uniform binary affinities over its edges.

Every edge {i,j} is a positive pair; the high-dimensional similarity of a
pair is 1/|edges| if the pair is an edge and 0 otherwise, so the affinities
sum to exactly 1 over all pairs.
"""

from __future__ import annotations

import numpy as np

from .data import Dataset
from .errors import GraphError

DEFAULT_K = 15


class NeighborGraph:
    """Symmetric set of positive pairs built from a kNN search.

    Edges are stored once as (i, j) with i < j, in ascending lexicographic
    order. Symmetrization is by union, so every node has degree >= k.
    """

    def __init__(self, edges, k: int, n: int):
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        self.edges = edges
        self.k = k
        self.n = n
        self._edge_set = {(int(i), int(j)) for i, j in edges}
        edges.setflags(write=False)

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    def has_edge(self, i: int, j: int) -> bool:
        if i > j:
            i, j = j, i
        return (i, j) in self._edge_set

    def degrees(self):
        deg = np.zeros(self.n, dtype=np.int64)
        np.add.at(deg, self.edges[:, 0], 1)
        np.add.at(deg, self.edges[:, 1], 1)
        return deg

    def edge_list_text(self) -> str:
        """Edge list export: one 'i,j' line per edge, i<j, lexicographic order."""
        return "".join(f"{i},{j}\n" for i, j in self.edges)


def _neighbor_indices(points, i, k):
    # Per-anchor difference form; summation order over features matches a
    # naive per-pair computation bit for bit.
    diff = points - points[i]
    d2 = np.einsum("nd,nd->n", diff, diff)
    d2[i] = np.inf
    order = np.argsort(d2, kind="stable")
    return order[:k]


def knn_graph(data, k: int = DEFAULT_K) -> NeighborGraph:
    """Build the exact symmetric kNN graph under Euclidean distance.

    An edge {i,j} exists iff j is among the k nearest neighbors of i or
    vice versa. Distance ties are broken toward the smaller index. Brute
    force O(N^2 D); intended for desk-scale data.
    """
    points = data.points if isinstance(data, Dataset) else np.asarray(points_arg_error(data))
    n = points.shape[0]
    if not 1 <= k <= n - 1:
        raise GraphError(f"k must satisfy 1 <= k <= N-1, got k={k}, N={n}")
    pairs = set()
    for i in range(n):
        for j in _neighbor_indices(points, i, k):
            a, b = (i, int(j)) if i < j else (int(j), i)
            pairs.add((a, b))
    edges = np.array(sorted(pairs), dtype=np.int64)
    return NeighborGraph(edges, k=k, n=n)


def points_arg_error(data):
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim != 2:
        raise GraphError("knn_graph expects a Dataset or an N x D array")
    return arr


def affinity(graph: NeighborGraph, i: int, j: int) -> float:
    """Binary affinity: 1/|edges| when {i,j} is a positive pair, else 0."""
    if i == j:
        raise GraphError("affinity is undefined for i == j")
    if not (0 <= i < graph.n and 0 <= j < graph.n):
        raise GraphError(f"indices ({i}, {j}) out of range for n={graph.n}")
    return 1.0 / graph.n_edges if graph.has_edge(i, j) else 0.0
