"""Embedding quality measures: kNN recall, leave-one-out kNN accuracy, and
the mean silhouette coefficient. All exact, brute force, desk scale."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset, Embedding
from .errors import CneError

DEFAULT_K_RECALL = 15
DEFAULT_K_ACCURACY = 10


@dataclass
class QualityReport:
    knn_recall: float | None = None
    knn_accuracy: float | None = None
    silhouette: float | None = None
    k_recall: int | None = None
    k_accuracy: int | None = None

    def to_dict(self) -> dict:
        return {
            "knn_recall": self.knn_recall,
            "knn_accuracy": self.knn_accuracy,
            "silhouette": self.silhouette,
            "k_recall": self.k_recall,
            "k_accuracy": self.k_accuracy,
        }


def _knn_sets(points, k):
    """Exact k nearest neighbors per row, distance ties toward smaller index."""
    n = points.shape[0]
    out = np.empty((n, k), dtype=np.int64)
    for i in range(n):
        diff = points - points[i]
        d2 = np.einsum("nd,nd->n", diff, diff)
        d2[i] = np.inf
        out[i] = np.argsort(d2, kind="stable")[:k]
    return out


def knn_recall(data: Dataset, emb: Embedding, k: int = DEFAULT_K_RECALL) -> float:
    """Mean fraction of high-dimensional k-neighbors preserved in the embedding."""
    n = data.n
    if not 1 <= k <= n - 1:
        raise CneError(f"k must satisfy 1 <= k <= N-1, got k={k}, N={n}")
    if emb.n != n:
        raise CneError("embedding row count does not match dataset")
    high = _knn_sets(data.points, k)
    low = _knn_sets(emb.coords, k)
    hits = 0
    for i in range(n):
        hits += len(np.intersect1d(high[i], low[i], assume_unique=True))
    return hits / (n * k)


def knn_accuracy(labels, emb: Embedding, k: int = DEFAULT_K_ACCURACY) -> float:
    """Leave-one-out majority-vote accuracy in embedding space.

    Vote ties go to the smaller label id.
    """
    if labels is None:
        raise CneError("knn_accuracy requires labels")
    labels = np.asarray(labels)
    n = emb.n
    if not 1 <= k <= n - 1:
        raise CneError(f"k must satisfy 1 <= k <= N-1, got k={k}, N={n}")
    if len(np.unique(labels)) < 2:
        raise CneError("knn_accuracy is degenerate with a single class")
    nbrs = _knn_sets(emb.coords, k)
    correct = 0
    for i in range(n):
        votes = np.bincount(labels[nbrs[i]])
        if votes.argmax() == labels[i]:
            correct += 1
    return correct / n


def silhouette(labels, emb: Embedding) -> float:
    """Mean silhouette coefficient with Euclidean embedding distances."""
    if labels is None:
        raise CneError("silhouette requires labels")
    labels = np.asarray(labels)
    classes, counts = np.unique(labels, return_counts=True)
    if len(classes) < 2:
        raise CneError("silhouette requires at least 2 classes")
    if counts.min() < 2:
        raise CneError("silhouette requires every class to have size >= 2")
    x = emb.coords
    n = emb.n
    diff = x[:, None, :] - x[None, :, :]
    dist = np.sqrt(np.einsum("ijd,ijd->ij", diff, diff))
    total = 0.0
    for i in range(n):
        own = labels == labels[i]
        a = dist[i, own].sum() / (own.sum() - 1)
        b = np.inf
        for c in classes:
            if c == labels[i]:
                continue
            other = labels == c
            b = min(b, dist[i, other].mean())
        denom = max(a, b)
        if denom > 0.0:
            total += (b - a) / denom
    return total / n


def quality_report(data: Dataset, emb: Embedding, k_recall: int = DEFAULT_K_RECALL,
                   k_accuracy: int = DEFAULT_K_ACCURACY) -> QualityReport:
    """All metrics computable for the given data; label metrics only when
    labels permit them."""
    report = QualityReport(k_recall=k_recall)
    report.knn_recall = knn_recall(data, emb, k_recall)
    if data.labels is not None and len(np.unique(data.labels)) >= 2:
        report.knn_accuracy = knn_accuracy(data.labels, emb, k_accuracy)
        report.k_accuracy = k_accuracy
        _, counts = np.unique(data.labels, return_counts=True)
        if counts.min() >= 2:
            report.silhouette = silhouette(data.labels, emb)
    return report
