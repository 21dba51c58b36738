import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from librarian.features import HsvHistogram
from librarian.fusion import (
    UNKNOWN,
    Observation,
    PositionCluster,
    SpineDetection,
    assign_cluster_ids,
    build_belief,
    choose_k,
    cluster_confidence,
    cluster_positions,
    prune_clusters,
)
from librarian.simulator import NoiseModel, Placement, synth_window, true_position

from conftest import make_book, make_scene

FLAT = np.full(20, 1 / 20)
HIST = HsvHistogram(FLAT, FLAT, FLAT)
SQUARE = ((0, 0), (1, 0), (1, 1), (0, 1))


def det(pos, book_id=1, conf=1.0, w=40.0, h=200.0):
    if len(pos) == 2:
        pos = (*pos, 0.0)
    return SpineDetection(SQUARE, pos, w, h, HIST, book_id, conf)


def obs_with_counts(counts):
    return [Observation(i, tuple(det((10.0 * j, 0)) for j in range(n))) for i, n in enumerate(counts)]


class TestChooseK:
    def test_max_rule(self):
        assert choose_k(obs_with_counts([3, 2, 4, 1])) == 4

    def test_single(self):
        assert choose_k(obs_with_counts([5])) == 5

    def test_empty_scene(self):
        assert choose_k(obs_with_counts([0, 0])) == 0

    def test_no_observations(self):
        with pytest.raises(ValueError):
            choose_k([])

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.integers(0, 7), min_size=1, max_size=12))
    def test_randomized(self, counts):
        assert choose_k(obs_with_counts(counts)) == max(counts)


def nearest_centroid_partition(points, centroids):
    d = ((points[:, None, :] - centroids[None]) ** 2).sum(axis=2)
    return np.argmin(d, axis=1)


class TestClusterPositions:
    def test_two_groups(self):
        rng = np.random.default_rng(0)
        a = rng.uniform(-0.5, 0.5, (5, 3))
        b = rng.uniform(-0.5, 0.5, (5, 3)) + [100, 0, 0]
        pts = np.vstack([a, b])
        for seed in range(10):
            groups = sorted(c.members for c in cluster_positions(pts, 2, seed))
            assert groups == [(0, 1, 2, 3, 4), (5, 6, 7, 8, 9)]

    def test_k1_global_mean(self):
        pts = np.random.default_rng(1).random((9, 3))
        (c,) = cluster_positions(pts, 1, 0)
        assert c.members == tuple(range(9))
        np.testing.assert_allclose(c.centroid, pts.mean(axis=0), atol=1e-12)

    def test_k_equals_n(self):
        pts = np.random.default_rng(2).random((6, 3))
        out = cluster_positions(pts, 6, 3)
        assert sorted(c.members for c in out) == [(i,) for i in range(6)]

    def test_k_too_large(self):
        with pytest.raises(ValueError):
            cluster_positions(np.zeros((2, 3)), 3, 0)

    def test_accepts_detections(self):
        dets = [det((0, 0)), det((1, 0)), det((100, 0))]
        out = cluster_positions(dets, 2, 0)
        assert sorted(c.members for c in out) == [(0, 1), (2,)]

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 2**31 - 1), st.integers(1, 6), st.integers(6, 40))
    def test_converged_partition(self, seed, k, n):
        pts = np.random.default_rng(seed).normal(0, 50, (n, 3))
        out = cluster_positions(pts, k, seed)
        assert len(out) == k
        assert sorted(i for c in out for i in c.members) == list(range(n))
        cents = np.array([c.centroid for c in out])
        labels = np.empty(n, int)
        for j, c in enumerate(out):
            assert c.members, "empty cluster survived"
            labels[list(c.members)] = j
            np.testing.assert_allclose(c.centroid, pts[list(c.members)].mean(axis=0), atol=1e-9)
        # with centroids held fixed, no single point gains by switching cluster
        own = ((pts - cents[labels]) ** 2).sum(axis=1)
        best = ((pts[:, None, :] - cents[None]) ** 2).sum(axis=2).min(axis=1)
        assert np.all(own <= best + 1e-9)

    def test_deterministic(self):
        pts = np.random.default_rng(4).normal(0, 10, (30, 3))
        a = cluster_positions(pts, 4, 42)
        b = cluster_positions(pts, 4, 42)
        assert [c.members for c in a] == [c.members for c in b]


def pc(n):
    return PositionCluster(tuple(range(n)), np.zeros(3))


class TestPrune:
    def test_sizes(self):
        assert [len(c.members) for c in prune_clusters([pc(5), pc(3), pc(4)])] == [5, 4]

    def test_boundary(self):
        assert len(prune_clusters([pc(4)])) == 1
        assert prune_clusters([pc(3)]) == []

    def test_all_small(self):
        assert prune_clusters([pc(1), pc(2), pc(3)]) == []

    @given(st.lists(st.integers(1, 12), max_size=10))
    def test_idempotent(self, sizes):
        once = prune_clusters([pc(s) for s in sizes])
        assert prune_clusters(once) == once


class TestClusterIds:
    db = [make_book(i) for i in (3, 5, 7)]

    def votes(self, **counts):
        return [det((0, 0), int(k[2:])) for k, n in counts.items() for _ in range(n)]

    def test_two_clusters(self):
        a = self.votes(id7=6, id3=1)
        b = self.votes(id3=5)
        assert assign_cluster_ids([a, b], self.db) == [7, 3]

    def test_unanimous(self):
        assert assign_cluster_ids([self.votes(id5=4)], self.db) == [5]

    def test_exhausted_column(self):
        a = self.votes(id5=6)
        b = self.votes(id5=4)
        assert assign_cluster_ids([a, b], self.db) == [5, UNKNOWN]
        assert assign_cluster_ids([a, b], [make_book(5)]) == [5, UNKNOWN]

    def test_empty_db(self):
        with pytest.raises(ValueError):
            assign_cluster_ids([self.votes(id5=4)], [])


class TestConfidence:
    def test_mean(self):
        assert cluster_confidence([0.8, 0.6]) == pytest.approx(0.7, abs=1e-15)

    def test_single(self):
        assert cluster_confidence([0.42]) == 0.42

    def test_empty(self):
        with pytest.raises(ValueError):
            cluster_confidence([])


def ghost_fixture(ghost_times, db):
    """Three books seen in all 10 frames plus a ghost far to the right in the first few."""
    frames = []
    for s in range(10):
        dets = [det((100.0 * (i + 1), 100.0), book_id=b.id, conf=1.1) for i, b in enumerate(db[:3])]
        if s < ghost_times:
            dets.append(det((700.0, 100.0), book_id=db[3].id, conf=0.4))
        frames.append(Observation(s, tuple(dets)))
    return frames


class TestBuildBelief:
    def test_noiseless_three_books(self, three_books):
        scene = make_scene([Placement(1, 1, 100.0), Placement(2, 1, 200.0), Placement(3, 1, 300.0)])
        obs = synth_window(scene, three_books, NoiseModel(seed=3), 10)
        belief = build_belief(obs, three_books, seed=3)
        assert len(belief.clusters) == 3
        assert [c.n for c in belief.clusters] == [10, 10, 10]
        truth = {p.book_id: true_position(p, scene.shelf, three_books) for p in scene.placements}
        for c in belief.clusters:
            assert np.abs(c.centroid - truth[c.book_id]).max() < 1e-9
        assert belief.source_window == (0, 9)

    @pytest.mark.parametrize("times, present", [(3, False), (4, True)])
    def test_ghost_pruning(self, times, present):
        db = [make_book(i) for i in (1, 2, 3, 9)]
        belief = build_belief(ghost_fixture(times, db), db, seed=0)
        assert (9 in belief.ids()) is present
        assert sorted(i for i in belief.ids() if i != 9) == [1, 2, 3]

    def test_empty(self, three_books):
        assert build_belief([], three_books).clusters == ()
        empty = [Observation(s, ()) for s in range(10)]
        b = build_belief(empty, three_books)
        assert b.clusters == ()
        assert b.source_window == (0, 9)

    def test_window_uses_latest(self, three_books):
        frames = ghost_fixture(0, [make_book(i) for i in (1, 2, 3, 9)])
        extra = [Observation(10 + s, ()) for s in range(10)]
        assert build_belief(frames + extra, three_books, window=10).clusters == ()

    def test_confidences_and_dims(self):
        db = [make_book(i) for i in (1, 2)]
        rng = np.random.default_rng(8)
        frames = []
        for s in range(10):
            frames.append(Observation(s, (
                det((100 + rng.normal(), 50, 0), 1, float(rng.uniform(0.5, 1.2)), w=40 + rng.normal(), h=200),
                det((300 + rng.normal(), 50, 0), 2, float(rng.uniform(0, 1.2)), w=30, h=150 + rng.normal()),
            )))
        belief = build_belief(frames, db, seed=1)
        assert belief.ids() == [1, 2]
        for c in belief.clusters:
            confs = [m.confidence for m in c.members]
            assert c.confidence == pytest.approx(sum(confs) / len(confs), abs=1e-12)
            assert min(confs) <= c.confidence <= max(confs)
            assert 0 <= c.confidence <= 1.2
            np.testing.assert_allclose(c.centroid, np.mean([m.position for m in c.members], axis=0), atol=1e-9)
            assert c.est_width_mm == pytest.approx(np.mean([m.rect_width_mm for m in c.members]))
            assert c.est_height_mm == pytest.approx(np.mean([m.rect_height_mm for m in c.members]))

    def test_bit_identical(self, three_books):
        scene = make_scene([Placement(1, 1, 100.0), Placement(2, 1, 200.0), Placement(3, 1, 300.0)])
        obs = synth_window(scene, three_books, NoiseModel(pos_sigma_mm=5, dropout_prob=0.2, seed=5), 10)
        a = build_belief(obs, three_books, seed=11)
        b = build_belief(obs, three_books, seed=11)
        assert a.ids() == b.ids()
        for x, y in zip(a.clusters, b.clusters):
            assert x.centroid.tobytes() == y.centroid.tobytes()
            assert x.confidence == y.confidence
            assert x.members == y.members

    def test_unique_ids(self, three_books):
        # two piles that both look like book 1: only one may claim it
        frames = [Observation(s, (det((100, 50), 1, 1.0), det((400, 50), 1, 0.9))) for s in range(10)]
        belief = build_belief(frames, three_books)
        assert sorted(belief.ids()) == [UNKNOWN, 1]
        unknown = [c for c in belief.clusters if c.book_id == UNKNOWN][0]
        assert unknown.confidence == 0.0
