"""Fuse a window of sequential observations into a world belief.

Recognitions from all observations are pooled, clustered by position with
k-means (k = the largest per-observation detection count), clusters with
too few recognitions are dropped, and each surviving cluster gets an id by
running the greedy assignment again on per-cluster id vote counts.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from librarian.bookdb import BookRecord
from librarian.features import MAX_SCORE, HsvHistogram, ScoreMatrix
from librarian.matching import greedy_assign

log = logging.getLogger(__name__)

UNKNOWN = -1
MAX_LLOYD_ITER = 100


@dataclass(frozen=True, eq=False)
class SpineDetection:
    polygon_px: tuple  # >= 4 image points
    position: np.ndarray  # shelf frame, mm
    rect_width_mm: float
    rect_height_mm: float
    histogram: HsvHistogram
    book_id: int
    confidence: float

    def __post_init__(self):
        poly = tuple(tuple(float(c) for c in p) for p in self.polygon_px)
        if len(poly) < 4 or any(len(p) != 2 for p in poly):
            raise ValueError("polygon_px needs at least 4 two-dimensional vertices")
        pos = np.array(self.position, dtype=float).reshape(3)
        pos.setflags(write=False)
        if not (self.rect_width_mm > 0 and self.rect_height_mm > 0):
            raise ValueError("rectified spine dimensions must be positive")
        if not 0.0 <= self.confidence <= MAX_SCORE:
            raise ValueError(f"confidence must lie in [0, {MAX_SCORE}], got {self.confidence}")
        object.__setattr__(self, "polygon_px", poly)
        object.__setattr__(self, "position", pos)


@dataclass(frozen=True)
class Observation:
    seq: int
    detections: tuple

    def __post_init__(self):
        if self.seq < 0:
            raise ValueError("seq must be >= 0")
        object.__setattr__(self, "detections", tuple(self.detections))


@dataclass(frozen=True, eq=False)
class PositionCluster:
    members: tuple  # indices into the pooled point list
    centroid: np.ndarray


@dataclass(frozen=True, eq=False)
class BookCluster:
    members: tuple
    centroid: np.ndarray
    book_id: int
    confidence: float
    est_width_mm: float
    est_height_mm: float

    @property
    def n(self) -> int:
        return len(self.members)


@dataclass(frozen=True, eq=False)
class WorldBelief:
    clusters: tuple
    source_window: tuple | None  # (first seq, last seq)

    def __post_init__(self):
        ids = [c.book_id for c in self.clusters if c.book_id != UNKNOWN]
        if len(ids) != len(set(ids)):
            raise ValueError("a book id appears in more than one cluster")

    def ids(self) -> list[int]:
        return [c.book_id for c in self.clusters]


def choose_k(obs: Sequence[Observation]) -> int:
    """Largest detection count in any single observation; 0 means an empty scene."""
    if not obs:
        raise ValueError("no observations")
    return max(len(o.detections) for o in obs)


def _farthest_point_init(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    idx = [int(rng.integers(len(x)))]
    d2 = ((x - x[idx[0]]) ** 2).sum(axis=1)
    for _ in range(1, k):
        nxt = int(np.argmax(d2))
        idx.append(nxt)
        d2 = np.minimum(d2, ((x - x[nxt]) ** 2).sum(axis=1))
    return x[idx].copy()


def _nearest(x: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    d2 = ((x[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    return np.argmin(d2, axis=1)


def cluster_positions(dets_or_points, k: int, seed: int) -> list[PositionCluster]:
    """Lloyd's k-means with farthest-point seeding.

    Runs until the assignment stops changing or for 100 iterations. An empty
    cluster is re-seeded with the point farthest from its own centroid.
    """
    x = _points(dets_or_points)
    n = len(x)
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > n:
        raise ValueError(f"k={k} exceeds the number of points ({n})")
    rng = np.random.default_rng(seed)
    centroids = _farthest_point_init(x, k, rng)
    labels = _nearest(x, centroids)
    for _ in range(MAX_LLOYD_ITER):
        _fill_empty(x, labels, centroids, k)
        centroids = np.array([x[labels == j].mean(axis=0) for j in range(k)])
        new = _nearest(x, centroids)
        if np.array_equal(new, labels):
            break
        labels = new
    else:
        _fill_empty(x, labels, centroids, k)
        centroids = np.array([x[labels == j].mean(axis=0) for j in range(k)])
    return [PositionCluster(tuple(np.flatnonzero(labels == j).tolist()), centroids[j]) for j in range(k)]


def _fill_empty(x: np.ndarray, labels: np.ndarray, centroids: np.ndarray, k: int) -> None:
    for j in range(k):
        if np.any(labels == j):
            continue
        spread = ((x - centroids[labels]) ** 2).sum(axis=1)
        # only take points from clusters that keep at least one member
        sizes = np.bincount(labels, minlength=k)
        spread[sizes[labels] <= 1] = -1.0
        labels[int(np.argmax(spread))] = j


def _points(dets_or_points) -> np.ndarray:
    items = list(dets_or_points)
    if items and isinstance(items[0], SpineDetection):
        return np.array([d.position for d in items], dtype=float)
    return np.asarray(items, dtype=float).reshape(len(items), -1)


def prune_clusters(clusters, min_members: int = 4) -> list:
    """Keep clusters with at least ``min_members`` recognitions, in order."""
    return [c for c in clusters if len(c.members) >= min_members]


def cluster_confidence(confidences: Sequence[float]) -> float:
    if len(confidences) == 0:
        raise ValueError("cluster has no members")
    return float(np.mean(confidences))


def assign_cluster_ids(groups: Sequence[Sequence[SpineDetection]], db: Sequence[BookRecord]) -> list[int]:
    """Greedy id assignment over per-cluster vote counts.

    ``groups`` holds the member detections of each cluster. A cluster left
    without a row, or matched only to an id it never voted for, is UNKNOWN.
    """
    if not db:
        raise ValueError("empty book database")
    if not groups:
        raise ValueError("no clusters to label")
    col = {b.id: j for j, b in enumerate(db)}
    counts = np.zeros((len(groups), len(db)))
    for i, members in enumerate(groups):
        for d in members:
            if d.book_id in col:
                counts[i, col[d.book_id]] += 1
    result = greedy_assign(ScoreMatrix(counts, range(len(groups)), [b.id for b in db]))
    ids = [UNKNOWN] * len(groups)
    for row, book_id, votes in result.pairs:
        if votes > 0:
            ids[row] = book_id
    return ids


def build_belief(
    obs: Sequence[Observation],
    db: Sequence[BookRecord],
    seed: int = 0,
    window: int | None = 10,
    prune_min: int = 4,
) -> WorldBelief:
    """Batch belief over the most recent ``window`` observations."""
    obs = list(obs)
    if window is not None:
        obs = obs[-window:]
    if not obs:
        return WorldBelief((), None)
    span = (obs[0].seq, obs[-1].seq)
    k = choose_k(obs)
    if k == 0:
        return WorldBelief((), span)
    pooled = [d for o in obs for d in o.detections]
    clusters = prune_clusters(cluster_positions(pooled, k, seed), prune_min)
    if not clusters:
        return WorldBelief((), span)
    clusters.sort(key=lambda c: tuple(c.centroid))
    groups = [[pooled[i] for i in c.members] for c in clusters]
    ids = assign_cluster_ids(groups, db)

    out = []
    for members, book_id in zip(groups, ids):
        if book_id == UNKNOWN:
            log.warning("cluster of %d recognitions left without an id", len(members))
        out.append(
            BookCluster(
                members=tuple(members),
                centroid=np.mean([d.position for d in members], axis=0),
                book_id=book_id,
                confidence=0.0 if book_id == UNKNOWN else cluster_confidence([d.confidence for d in members]),
                est_width_mm=float(np.mean([d.rect_width_mm for d in members])),
                est_height_mm=float(np.mean([d.rect_height_mm for d in members])),
            )
        )
    return WorldBelief(tuple(out), span)
