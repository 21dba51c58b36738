"""Procedural sort-and-place planning.

Every plan has the same shape: stop perception, move each recognised book
to the target level in sorted order (left to right, each leaning on the
wall or on the previously placed book), restart perception.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from librarian.bookdb import BookRecord, UnknownBookError, lookup
from librarian.fusion import UNKNOWN, WorldBelief
from librarian.geometry import ShelfGeometry

log = logging.getLogger(__name__)

SORT_PROPERTIES = ("height",)
ACTION_KINDS = ("perception_stop", "perception_start", "pick_place")
LEAN_DIRECTIONS = ("left", "right")


class ShelfOverflowError(ValueError):
    pass


@dataclass(frozen=True)
class SortCommand:
    property: str = "height"
    target_shelf_level: int = 0

    def __post_init__(self):
        if self.property not in SORT_PROPERTIES:
            raise ValueError(f"unsupported sort property {self.property!r}; supported: {SORT_PROPERTIES}")


@dataclass(frozen=True)
class PlacePose:
    x_mm: float  # left edge of the book along the level
    level: int
    lean: str = "left"
    support: str = "wall"  # "wall" or "book"

    def point(self, shelf: ShelfGeometry) -> np.ndarray:
        """Bottom-left front corner of the placed book in the shelf frame."""
        return np.array([self.x_mm, self.level * shelf.level_height_mm, 0.0])


@dataclass(frozen=True)
class PlanAction:
    kind: str
    book_id: int | None = None
    pose: PlacePose | None = None

    def __post_init__(self):
        if self.kind not in ACTION_KINDS:
            raise ValueError(f"unknown action kind {self.kind!r}")
        if self.kind == "pick_place":
            if self.book_id is None or self.pose is None:
                raise ValueError("pick_place needs a book_id and a place pose")
            if self.pose.lean not in LEAN_DIRECTIONS:
                raise ValueError(f"lean must be one of {LEAN_DIRECTIONS}")
        elif self.book_id is not None or self.pose is not None:
            raise ValueError(f"{self.kind} takes no book or pose")

    def to_dict(self) -> dict:
        if self.kind != "pick_place":
            return {"kind": self.kind}
        return {
            "kind": self.kind,
            "book_id": self.book_id,
            "place_x_mm": self.pose.x_mm,
            "level": self.pose.level,
            "lean": self.pose.lean,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PlanAction":
        if d.get("kind") != "pick_place":
            return cls(d.get("kind"))
        return cls(
            "pick_place",
            int(d["book_id"]),
            PlacePose(float(d["place_x_mm"]), int(d["level"]), d.get("lean", "left")),
        )


@dataclass(frozen=True)
class Plan:
    actions: tuple

    def __post_init__(self):
        acts = tuple(self.actions)
        if len(acts) < 2 or acts[0].kind != "perception_stop" or acts[-1].kind != "perception_start":
            raise ValueError("a plan must start with perception_stop and end with perception_start")
        if any(a.kind != "pick_place" for a in acts[1:-1]):
            raise ValueError("only pick_place actions may sit between the perception toggles")
        object.__setattr__(self, "actions", acts)

    @property
    def pick_places(self) -> list[PlanAction]:
        return list(self.actions[1:-1])

    def to_list(self) -> list[dict]:
        return [a.to_dict() for a in self.actions]

    @classmethod
    def from_list(cls, items: list[dict]) -> "Plan":
        return cls(tuple(PlanAction.from_dict(d) for d in items))


def sort_books(belief: WorldBelief, cmd: SortCommand, db: Sequence[BookRecord]) -> list[int]:
    """Resolvable belief ids, tallest first; equal heights by ascending id."""
    books = []
    for c in belief.clusters:
        if c.book_id == UNKNOWN:
            log.warning("skipping unidentified cluster at %s", np.round(c.centroid, 1).tolist())
            continue
        try:
            books.append(lookup(db, c.book_id))
        except UnknownBookError:
            log.warning("skipping cluster with id %d absent from the database", c.book_id)
    books.sort(key=lambda b: (-b.height_mm, b.id))
    return [b.id for b in books]


def target_slot(
    index: int,
    placed_widths: Sequence[float],
    width_mm: float,
    shelf: ShelfGeometry,
    level: int,
    margin_mm: float = 20.0,
    gap_mm: float = 5.0,
) -> PlacePose:
    """Slot ``index`` on ``level``: x = margin + sum(width_j + gap) over earlier books."""
    shelf.check_level(level)
    if index > len(placed_widths):
        raise ValueError(f"slot {index} needs {index} earlier widths, got {len(placed_widths)}")
    x = margin_mm + sum(w + gap_mm for w in placed_widths[:index])
    if x + width_mm > shelf.level_width_mm:
        raise ShelfOverflowError(
            f"slot {index}: book of width {width_mm} mm at x={x} mm overruns the {shelf.level_width_mm} mm level"
        )
    return PlacePose(x, level, "left", "wall" if index == 0 else "book")


def make_plan(
    belief: WorldBelief,
    cmd: SortCommand,
    db: Sequence[BookRecord],
    shelf: ShelfGeometry,
    margin_mm: float = 20.0,
    gap_mm: float = 5.0,
) -> Plan:
    actions = [PlanAction("perception_stop")]
    widths: list[float] = []
    for i, book_id in enumerate(sort_books(belief, cmd, db)):
        w = lookup(db, book_id).width_mm
        pose = target_slot(i, widths, w, shelf, cmd.target_shelf_level, margin_mm, gap_mm)
        actions.append(PlanAction("pick_place", book_id, pose))
        widths.append(w)
    actions.append(PlanAction("perception_start"))
    return Plan(tuple(actions))
