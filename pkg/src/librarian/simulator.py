"""Ground-truth shelf world.

Synthesises noisy spine observations in place of the camera and detector
stack, and executes pick+place plans under the manipulation preconditions
(standing, spine-aligned, sufficiently tall lean support). Action outcomes
are deterministic.
"""

from __future__ import annotations

import copy
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np

from librarian.bookdb import BookRecord, UnknownBookError, lookup
from librarian.features import hsv_histogram, sample_spine_pixels, score_against_db
from librarian.fusion import UNKNOWN, Observation, SpineDetection
from librarian.geometry import (
    CameraModel,
    ShelfGeometry,
    invert_homography,
    level_rectification,
    unrectify_polygon,
)
from librarian.matching import greedy_assign
from librarian.planner import Plan, PlanAction

FAILURE_REASONS = ("not_standing", "spine_not_aligned", "support_too_short", "out_of_bounds", "unknown_book")
TRUNCATE_SIGMAS = 4.0
GRASP_SUBSTEPS = ("tilt", "grasp", "release", "regrasp", "extract", "lean", "release")
_EPS = 1e-9


class SceneError(ValueError):
    pass


@dataclass(frozen=True)
class Placement:
    book_id: int
    level: int
    x_mm: float  # left edge along the level
    standing: bool = True
    spine_aligned: bool = True


@dataclass(frozen=True)
class NoiseModel:
    pos_sigma_mm: float = 0.0
    dropout_prob: float = 0.0
    hist_sample_count: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.pos_sigma_mm < 0:
            raise ValueError("pos_sigma_mm must be >= 0")
        if not 0.0 <= self.dropout_prob <= 1.0:
            raise ValueError("dropout_prob must lie in [0, 1]")
        if self.hist_sample_count < 1:
            raise ValueError("hist_sample_count must be >= 1")


@dataclass
class ShelfScene:
    shelf: ShelfGeometry
    camera: CameraModel
    placements: list = field(default_factory=list)
    perception_active: bool = True

    def snapshot(self) -> list[dict]:
        return [asdict(p) for p in self.placements]

    def find(self, book_id: int) -> int | None:
        for i, p in enumerate(self.placements):
            if p.book_id == book_id:
                return i
        return None

    def on_level(self, level: int) -> list[Placement]:
        return sorted((p for p in self.placements if p.level == level), key=lambda p: p.x_mm)

    def copy(self) -> "ShelfScene":
        return copy.deepcopy(self)


@dataclass(frozen=True)
class ActionResult:
    ok: bool
    failure_reason: str | None = None
    substeps: tuple = ()

    def __post_init__(self):
        if self.ok != (self.failure_reason is None):
            raise ValueError("failure_reason must be set exactly when the action failed")
        if self.failure_reason is not None and self.failure_reason not in FAILURE_REASONS:
            raise ValueError(f"unknown failure reason {self.failure_reason!r}")


def _interval(p: Placement, db) -> tuple[float, float]:
    return p.x_mm, p.x_mm + lookup(db, p.book_id).width_mm


def _fits(shelf: ShelfGeometry, book: BookRecord, level: int, x: float) -> bool:
    return (
        0 <= level < shelf.n_levels
        and x >= -_EPS
        and x + book.width_mm <= shelf.level_width_mm + _EPS
        and book.height_mm <= shelf.level_height_mm + _EPS
    )


def overlaps(scene: ShelfScene, db) -> list[tuple[int, int]]:
    """Pairs of book ids whose x-intervals overlap on the same level."""
    bad = []
    for level in range(scene.shelf.n_levels):
        row = scene.on_level(level)
        for a, b in zip(row, row[1:]):
            if _interval(a, db)[1] > b.x_mm + _EPS:
                bad.append((a.book_id, b.book_id))
    return bad


def validate_scene(scene: ShelfScene, db: Sequence[BookRecord]) -> None:
    ids = [p.book_id for p in scene.placements]
    if len(ids) != len(set(ids)):
        raise SceneError("a book is placed more than once")
    for p in scene.placements:
        try:
            book = lookup(db, p.book_id)
        except UnknownBookError:
            raise SceneError(f"placement refers to unknown book {p.book_id}") from None
        if not _fits(scene.shelf, book, p.level, p.x_mm):
            raise SceneError(f"book {p.book_id} at level {p.level}, x={p.x_mm} lies outside the shelf")
    bad = overlaps(scene, db)
    if bad:
        raise SceneError(f"overlapping placements: {bad}")


def true_position(p: Placement, shelf: ShelfGeometry, db) -> np.ndarray:
    """Spine centre on the front plane, shelf frame."""
    book = lookup(db, p.book_id)
    return np.array([p.x_mm + book.width_mm / 2, p.level * shelf.level_height_mm + book.height_mm / 2, 0.0])


def _truncated_normal(rng: np.random.Generator, sigma: float, size: int) -> np.ndarray:
    if sigma == 0:
        return np.zeros(size)
    out = rng.normal(0.0, sigma, size)
    bad = np.abs(out) > TRUNCATE_SIGMAS * sigma
    while np.any(bad):
        out[bad] = rng.normal(0.0, sigma, int(bad.sum()))
        bad = np.abs(out) > TRUNCATE_SIGMAS * sigma
    return out


def synth_observation(
    scene: ShelfScene,
    db: Sequence[BookRecord],
    noise: NoiseModel,
    seq: int,
    reference_samples: int = 2000,
    min_score: float | None = None,
    candidates: Sequence[BookRecord] | None = None,
) -> Observation:
    """One frame of spine detections, deterministic in (noise.seed, seq).

    Each standing book survives dropout independently. Its spine rectangle is
    jittered in the rectified level frame (mm), mapped back to pixels through
    the inverse rectification, and its histogram is drawn from the book's
    colour model. Ids and confidences come from scoring the whole frame
    against the database (or ``candidates``, when recognition should see a
    different catalogue than the world) and running the greedy assignment.
    """
    rng = np.random.default_rng([noise.seed, seq])
    shelf = scene.shelf
    unrect = {}
    raw = []
    for p in scene.placements:
        if not p.standing:
            continue
        if rng.random() < noise.dropout_prob:
            continue
        book = lookup(db, p.book_id)
        dx, dy, dw, dh = _truncated_normal(rng, noise.pos_sigma_mm, 4)
        cx = p.x_mm + book.width_mm / 2 + dx
        cy = book.height_mm / 2 + dy  # level-local, up
        rw = max(book.width_mm + dw, 1.0)
        rh = max(book.height_mm + dh, 1.0)
        H = shelf.level_height_mm
        u0, u1 = cx - rw / 2, cx + rw / 2
        v0, v1 = H - (cy + rh / 2), H - (cy - rh / 2)
        if p.level not in unrect:
            unrect[p.level] = invert_homography(level_rectification(scene.camera, shelf, p.level))
        poly = unrectify_polygon(unrect[p.level], [(u0, v0), (u1, v0), (u1, v1), (u0, v1)])
        hist = hsv_histogram(sample_spine_pixels(book.spine_color, noise.hist_sample_count, rng))
        pos = np.array([cx, p.level * H + cy, 0.0])
        raw.append((poly, pos, rw, rh, hist))

    if not raw:
        return Observation(seq, ())
    match_db = db if candidates is None else candidates
    result = greedy_assign(score_against_db([r[4] for r in raw], match_db, reference_samples), min_score)
    labels = {row: (book_id, score) for row, book_id, score in result.pairs}
    dets = []
    for i, (poly, pos, rw, rh, hist) in enumerate(raw):
        book_id, conf = labels.get(i, (UNKNOWN, 0.0))
        dets.append(SpineDetection(tuple(map(tuple, poly)), pos, rw, rh, hist, book_id, conf))
    return Observation(seq, tuple(dets))


def synth_window(scene, db, noise: NoiseModel, window: int = 10, start_seq: int = 0, **kw) -> list[Observation]:
    return [synth_observation(scene, db, noise, s, **kw) for s in range(start_seq, start_seq + window)]


def _support_height(scene: ShelfScene, db, level: int, x: float, width: float, lean: str, skip: int) -> float:
    """Height of what the book leans on: the nearest neighbour on the lean side, else the wall."""
    best, best_gap = None, np.inf
    for i, q in enumerate(scene.placements):
        if i == skip or q.level != level:
            continue
        lo, hi = _interval(q, db)
        gap = x - hi if lean == "left" else lo - (x + width)
        if gap >= -_EPS and gap < best_gap:
            best, best_gap = q, gap
    return np.inf if best is None else lookup(db, best.book_id).height_mm


def execute_action(
    scene: ShelfScene,
    action: PlanAction,
    db: Sequence[BookRecord],
    lean_tolerance_mm: float = 30.0,
) -> ActionResult:
    """Apply one action to ``scene`` in place. Failed actions leave it untouched."""
    if action.kind == "perception_stop":
        scene.perception_active = False
        return ActionResult(True)
    if action.kind == "perception_start":
        scene.perception_active = True
        return ActionResult(True)

    idx = scene.find(action.book_id)
    if idx is None:
        return ActionResult(False, "unknown_book")
    try:
        book = lookup(db, action.book_id)
    except UnknownBookError:
        return ActionResult(False, "unknown_book")
    src = scene.placements[idx]
    if not src.standing:
        return ActionResult(False, "not_standing")
    if not src.spine_aligned:
        return ActionResult(False, "spine_not_aligned")

    pose = action.pose
    if not _fits(scene.shelf, book, pose.level, pose.x_mm):
        return ActionResult(False, "out_of_bounds", GRASP_SUBSTEPS[:5])
    lo, hi = pose.x_mm, pose.x_mm + book.width_mm
    for i, q in enumerate(scene.placements):
        if i == idx or q.level != pose.level:
            continue
        qlo, qhi = _interval(q, db)
        if qlo < hi - _EPS and lo < qhi - _EPS:
            return ActionResult(False, "out_of_bounds", GRASP_SUBSTEPS[:5])
    support = _support_height(scene, db, pose.level, pose.x_mm, book.width_mm, pose.lean, idx)
    if book.height_mm - support > lean_tolerance_mm:
        return ActionResult(False, "support_too_short", GRASP_SUBSTEPS[:6])

    scene.placements[idx] = replace(src, level=pose.level, x_mm=pose.x_mm, standing=True, spine_aligned=True)
    return ActionResult(True, None, GRASP_SUBSTEPS)


@dataclass
class EpisodeStep:
    index: int
    action: dict
    ok: bool
    failure_reason: str | None
    substeps: list
    perception_active: bool
    scene: list

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class EpisodeLog:
    steps: list = field(default_factory=list)
    halted_at: int | None = None

    @property
    def actions_ok(self) -> int:
        return sum(s.ok for s in self.steps)

    @property
    def completed(self) -> bool:
        return self.halted_at is None

    def to_dict(self) -> dict:
        return {"halted_at": self.halted_at, "steps": [s.to_dict() for s in self.steps]}


def run_episode(
    scene: ShelfScene,
    plan: Plan,
    db: Sequence[BookRecord],
    lean_tolerance_mm: float = 30.0,
) -> tuple[EpisodeLog, ShelfScene]:
    """Execute ``plan`` on a copy of ``scene``; stop at the first failure."""
    world = scene.copy()
    log = EpisodeLog()
    for i, action in enumerate(plan.actions):
        res = execute_action(world, action, db, lean_tolerance_mm)
        log.steps.append(
            EpisodeStep(i, action.to_dict(), res.ok, res.failure_reason, list(res.substeps),
                        world.perception_active, world.snapshot())
        )
        if not res.ok:
            log.halted_at = i
            break
    return log, world
