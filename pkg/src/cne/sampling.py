"""Minibatch construction: positive edges, uniform negatives, mid-near and
label-positive sets, plus the annealed mid-near weight schedule.

Negatives are drawn uniformly from all non-anchor samples and deliberately
NOT filtered against the positive set; a sampled negative may coincide with
a true neighbor (collision probability O(k/N)).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import Dataset
from .errors import SamplingError
from .neighbor_graph import NeighborGraph

DEFAULT_M = 5
DEFAULT_BATCH_SIZE = 1024
DEFAULT_MIDNEAR_POOL = 6
DEFAULT_N_MID = 2
DEFAULT_MAX_LABEL_POSITIVES = 16


@dataclass(frozen=True)
class ScheduleSpec:
    """Positive weight and the piecewise-linear mid-near weight over epochs.

    w_u(t) interpolates w_u_init -> w_u_final over the first
    anneal_fraction of the epochs and stays at w_u_final afterward.
    """

    w_p: float = 1.0
    w_u_init: float = 1.0
    w_u_final: float = 0.0
    anneal_fraction: float = 0.5

    def __post_init__(self):
        if not self.w_p > 0:
            raise SamplingError("w_p must be positive")
        if self.w_u_init < 0 or self.w_u_final < 0:
            raise SamplingError("mid-near weights must be non-negative")
        if not 0.0 <= self.anneal_fraction <= 1.0:
            raise SamplingError("anneal_fraction must lie in [0, 1]")

    def w_u(self, epoch: int, n_epochs: int) -> float:
        t_anneal = self.anneal_fraction * n_epochs
        if t_anneal <= 0 or epoch >= t_anneal:
            return self.w_u_final
        return self.w_u_init + (self.w_u_final - self.w_u_init) * (epoch / t_anneal)


@dataclass
class PairBatch:
    """One minibatch of anchor-positive edges with sampled companion sets.

    label_positives holds, per anchor, positions into `anchors` (not dataset
    indices) of batch members sharing the anchor's label.
    """

    anchors: np.ndarray            # (B,)
    positives: np.ndarray          # (B,)
    negatives: np.ndarray          # (B, m)
    midnears: np.ndarray | None = None        # (B, n_mid)
    label_positives: list | None = None       # B arrays of batch positions

    @property
    def size(self) -> int:
        return len(self.anchors)

    @property
    def m(self) -> int:
        return self.negatives.shape[1]

    def all_indices(self):
        parts = [self.anchors, self.positives, self.negatives.ravel()]
        if self.midnears is not None:
            parts.append(self.midnears.ravel())
        return np.unique(np.concatenate(parts))


def _uniform_non_anchor(anchors, n, size, rng):
    # Uniform over {0..n-1} \ {anchor}: draw from n-1 slots and skip the anchor.
    raw = rng.integers(0, n - 1, size=size)
    return raw + (raw >= anchors)


def sample_edge_batch(graph: NeighborGraph, batch_size: int, m: int, rng) -> PairBatch:
    """Draw batch_size edges uniformly with replacement, random orientation,
    plus m uniform non-anchor negatives per edge."""
    if batch_size < 1 or m < 1:
        raise SamplingError("batch_size and m must be >= 1")
    if graph.n_edges == 0:
        raise SamplingError("cannot sample from an empty graph")
    picks = rng.integers(0, graph.n_edges, size=batch_size)
    flip = rng.random(batch_size) < 0.5
    edges = graph.edges[picks]
    anchors = np.where(flip, edges[:, 1], edges[:, 0])
    positives = np.where(flip, edges[:, 0], edges[:, 1])
    negatives = _uniform_non_anchor(anchors[:, None], graph.n, (batch_size, m), rng)
    return PairBatch(anchors=anchors, positives=positives, negatives=negatives)


def sample_midnear(data: Dataset, anchor: int, rng, pool: int = DEFAULT_MIDNEAR_POOL) -> int:
    """Second-nearest (to the anchor, in input space) of `pool` distinct
    uniformly drawn non-anchor candidates."""
    n = data.n
    if pool < 2:
        raise SamplingError("pool must be >= 2")
    if n <= pool:
        raise SamplingError(f"need N > pool, got N={n}, pool={pool}")
    raw = rng.choice(n - 1, size=pool, replace=False)
    cand = raw + (raw >= anchor)
    cand = np.sort(cand)  # ascending index so stable sort breaks distance ties low
    diff = data.points[cand] - data.points[anchor]
    d2 = np.einsum("pd,pd->p", diff, diff)
    order = np.argsort(d2, kind="stable")
    return int(cand[order[1]])


def sample_midnears(data: Dataset, anchors, rng, pool: int = DEFAULT_MIDNEAR_POOL,
                    n_mid: int = DEFAULT_N_MID):
    """Vectorized mid-near sampling: n_mid independent draws per anchor,
    each the second-nearest of a fresh pool of `pool` distinct candidates."""
    n = data.n
    if pool < 2:
        raise SamplingError("pool must be >= 2")
    if n <= pool:
        raise SamplingError(f"need N > pool, got N={n}, pool={pool}")
    anchors = np.asarray(anchors)
    b = len(anchors)
    rep = np.repeat(anchors, n_mid)
    # Rejection sampling: redraw rows until all pool candidates are distinct.
    cand = rep[:, None] + rng.integers(1, n, size=(b * n_mid, pool))
    cand %= n
    bad = (np.sort(cand, axis=1)[:, 1:] == np.sort(cand, axis=1)[:, :-1]).any(axis=1)
    while bad.any():
        rows = np.nonzero(bad)[0]
        redraw = rep[rows, None] + rng.integers(1, n, size=(len(rows), pool))
        cand[rows] = redraw % n
        srt = np.sort(cand[rows], axis=1)
        bad[rows] = (srt[:, 1:] == srt[:, :-1]).any(axis=1)
    cand = np.sort(cand, axis=1)
    diff = data.points[cand] - data.points[rep][:, None, :]
    d2 = np.einsum("bpd,bpd->bp", diff, diff)
    order = np.argsort(d2, axis=1, kind="stable")
    second = cand[np.arange(b * n_mid), order[:, 1]]
    return second.reshape(b, n_mid)


def label_positive_set(labels, batch, anchor: int):
    """Positions in `batch` sharing the label of batch[anchor], excluding anchor.

    `batch` holds dataset indices; `anchor` is a position into `batch`.
    """
    if labels is None:
        raise SamplingError("label_positive_set requires labels")
    batch = np.asarray(batch)
    lbl = labels[batch[anchor]]
    same = np.nonzero(labels[batch] == lbl)[0]
    return same[same != anchor]


def attach_label_positives(batch: PairBatch, labels, max_per_anchor=None,
                           rng=None) -> PairBatch:
    """Fill batch.label_positives from the dataset labels (positions per anchor).

    With max_per_anchor set, each anchor keeps a uniform random subset of at
    most that many same-label positions; the per-anchor average over the
    label-positive set is estimated from the subset.
    """
    lab = labels[batch.anchors]
    by_label: dict = {}
    for pos, l in enumerate(lab):
        by_label.setdefault(int(l), []).append(pos)
    groups = {l: np.asarray(ps, dtype=np.int64) for l, ps in by_label.items()}
    if max_per_anchor is None:
        batch.label_positives = [
            groups[int(l)][groups[int(l)] != pos] for pos, l in enumerate(lab)
        ]
        return batch
    if rng is None:
        raise SamplingError("capped label positives need a generator")
    out = [None] * len(lab)
    for l, members in groups.items():
        size = len(members)
        if size - 1 <= max_per_anchor:
            for pos in members:
                out[pos] = members[members != pos]
            continue
        # Random keys per (anchor, candidate); own position excluded, the
        # max_per_anchor smallest keys form a uniform subset.
        keys = rng.random((size, size))
        keys[np.arange(size), np.arange(size)] = np.inf
        pick = np.argpartition(keys, max_per_anchor, axis=1)[:, :max_per_anchor]
        for row, pos in enumerate(members):
            out[pos] = members[pick[row]]
    batch.label_positives = out
    return batch


@dataclass
class Sampler:
    """Deterministic batch stream over a neighbor graph.

    Owns one seeded generator; the batch sequence is a pure function of the
    seed and the construction arguments.
    """

    graph: NeighborGraph
    data: Dataset | None = None
    batch_size: int = DEFAULT_BATCH_SIZE
    m: int = DEFAULT_M
    pool: int = DEFAULT_MIDNEAR_POOL
    n_mid: int = DEFAULT_N_MID
    seed: int = 0
    need_midnears: bool = False
    need_labels: bool = False
    max_label_positives: int | None = DEFAULT_MAX_LABEL_POSITIVES
    rng: np.random.Generator = field(init=False)

    def __post_init__(self):
        if self.need_midnears and self.data is None:
            raise SamplingError("mid-near sampling requires the dataset")
        if self.need_labels and (self.data is None or self.data.labels is None):
            raise SamplingError("label positives require a labeled dataset")
        self.rng = np.random.default_rng(self.seed)

    def next_batch(self) -> PairBatch:
        batch = sample_edge_batch(self.graph, self.batch_size, self.m, self.rng)
        if self.need_midnears:
            batch.midnears = sample_midnears(
                self.data, batch.anchors, self.rng, pool=self.pool, n_mid=self.n_mid
            )
        if self.need_labels:
            attach_label_positives(batch, self.data.labels,
                                   max_per_anchor=self.max_label_positives,
                                   rng=self.rng)
        return batch


def random_batch(n: int, batch_size: int, m: int, rng, n_mid: int = DEFAULT_N_MID,
                 labels=None) -> PairBatch:
    """Synthetic batch over n abstract samples, for gradient checks."""
    anchors = rng.integers(0, n, size=batch_size)
    positives = _uniform_non_anchor(anchors, n, batch_size, rng)
    negatives = _uniform_non_anchor(anchors[:, None], n, (batch_size, m), rng)
    midnears = _uniform_non_anchor(anchors[:, None], n, (batch_size, n_mid), rng)
    batch = PairBatch(anchors=anchors, positives=positives,
                      negatives=negatives, midnears=midnears)
    if labels is not None:
        attach_label_positives(batch, labels)
    return batch
