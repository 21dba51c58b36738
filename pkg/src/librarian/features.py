"""HSV spine histograms and the spine-to-book similarity score."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from librarian.bookdb import BookRecord, SpineColorModel

N_BINS = 20
SAT_WEIGHT = 0.2
MAX_SCORE = 1.0 + SAT_WEIGHT
_REFERENCE_SALT = 0x5EED


def _channel(v) -> np.ndarray:
    a = np.array(v, dtype=float).reshape(-1)
    if a.shape != (N_BINS,):
        raise ValueError(f"histogram channel must have {N_BINS} bins, got {a.size}")
    if np.any(a < 0) or not np.all(np.isfinite(a)):
        raise ValueError("histogram bins must be finite and >= 0")
    if abs(a.sum() - 1.0) > 1e-9:
        raise ValueError(f"histogram channel must sum to 1, sums to {a.sum()}")
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class HsvHistogram:
    hue: np.ndarray
    sat: np.ndarray
    val: np.ndarray

    def __post_init__(self):
        for name in ("hue", "sat", "val"):
            object.__setattr__(self, name, _channel(getattr(self, name)))

    def __eq__(self, other):
        if not isinstance(other, HsvHistogram):
            return NotImplemented
        return all(np.array_equal(getattr(self, c), getattr(other, c)) for c in ("hue", "sat", "val"))

    def to_dict(self) -> dict:
        return {"hue": self.hue.tolist(), "sat": self.sat.tolist(), "val": self.val.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "HsvHistogram":
        return cls(d["hue"], d["sat"], d["val"])


def bin_index(x: np.ndarray) -> np.ndarray:
    """floor(x * 20), with x == 1 falling into the last bin."""
    return np.minimum((np.asarray(x) * N_BINS).astype(int), N_BINS - 1)


def hsv_histogram(samples) -> HsvHistogram:
    s = np.asarray(samples, dtype=float)
    if s.size == 0:
        raise ValueError("cannot build a histogram from zero samples")
    s = s.reshape(-1, 3)
    if np.any(s < 0) or np.any(s > 1) or not np.all(np.isfinite(s)):
        raise ValueError("HSV components must lie in [0, 1]")
    n = len(s)
    chans = [np.bincount(bin_index(s[:, c]), minlength=N_BINS) / n for c in range(3)]
    return HsvHistogram(*chans)


def cosine_similarity(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    aa, bb = float(a @ a), float(b @ b)
    if aa == 0 or bb == 0:
        raise ValueError("cosine similarity of a zero vector is undefined")
    # sqrt(aa * bb) rather than norm * norm: gives exactly 1 for a == b
    return min(1.0, float(a @ b) / np.sqrt(aa * bb))


def spine_score(det: HsvHistogram, book: HsvHistogram) -> float:
    """Hue similarity plus 0.2 x saturation similarity; value is ignored."""
    return cosine_similarity(det.hue, book.hue) + SAT_WEIGHT * cosine_similarity(det.sat, book.sat)


@dataclass(frozen=True, eq=False)
class ScoreMatrix:
    scores: np.ndarray  # rows: detections, cols: books
    row_keys: tuple
    col_keys: tuple

    def __post_init__(self):
        s = np.array(self.scores, dtype=float)
        if s.ndim != 2 or s.shape != (len(self.row_keys), len(self.col_keys)):
            raise ValueError("score matrix shape does not match its keys")
        s.setflags(write=False)
        object.__setattr__(self, "scores", s)
        object.__setattr__(self, "row_keys", tuple(self.row_keys))
        object.__setattr__(self, "col_keys", tuple(self.col_keys))

    @property
    def shape(self):
        return self.scores.shape


def score_matrix(dets: Sequence[HsvHistogram], books: Sequence[HsvHistogram], book_ids=None) -> ScoreMatrix:
    if not dets:
        raise ValueError("no detections to score")
    if not books:
        raise ValueError("no database books to score against")
    if book_ids is None:
        book_ids = range(len(books))
    scores = np.array([[spine_score(d, b) for b in books] for d in dets])
    return ScoreMatrix(scores, tuple(range(len(dets))), tuple(book_ids))


def sample_spine_pixels(color: SpineColorModel, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw n HSV pixels from a spine colour model, clipped to [0, 1] (hue does not wrap)."""
    means = np.array([color.hue_mean, color.sat_mean, color.val_mean])
    spreads = np.array([color.hue_spread, color.sat_spread, color.val_spread])
    return np.clip(rng.normal(means, spreads, size=(n, 3)), 0.0, 1.0)


@lru_cache(maxsize=None)
def _reference(color: SpineColorModel, book_id: int, n: int) -> HsvHistogram:
    rng = np.random.default_rng([_REFERENCE_SALT, book_id])
    return hsv_histogram(sample_spine_pixels(color, n, rng))


def reference_histogram(book: BookRecord, n_samples: int = 2000) -> HsvHistogram:
    """Database-side histogram for a book, from a fixed nominal seed per id."""
    return _reference(book.spine_color, book.id, n_samples)


def score_against_db(dets: Sequence[HsvHistogram], db: Sequence[BookRecord], n_samples: int = 2000) -> ScoreMatrix:
    refs = [reference_histogram(b, n_samples) for b in db]
    return score_matrix(dets, refs, [b.id for b in db])
