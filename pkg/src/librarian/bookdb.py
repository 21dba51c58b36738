"""Book database: records, validation and lookup.

The on-disk format is a JSON array (``books.json``), one object per book.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

COVER_TYPES = ("hard", "soft")

_RECORD_KEYS = {
    "id", "title", "height_mm", "width_mm", "depth_mm",
    "author", "cover_type", "count", "spine_color",
}
_COLOR_KEYS = {"hue_mean", "hue_spread", "sat_mean", "sat_spread", "val_mean", "val_spread"}


class DatabaseError(ValueError):
    """Raised for unreadable or invalid book databases."""


class UnknownBookError(KeyError):
    def __init__(self, book_id):
        super().__init__(book_id)
        self.book_id = book_id

    def __str__(self):
        return f"unknown book id {self.book_id}"


@dataclass(frozen=True)
class SpineColorModel:
    """Per-channel Gaussian colour model of a spine, in HSV with all channels in [0, 1]."""

    hue_mean: float
    hue_spread: float
    sat_mean: float
    sat_spread: float
    val_mean: float
    val_spread: float

    def __post_init__(self):
        if not 0.0 <= self.hue_mean < 1.0:
            raise ValueError(f"hue_mean must lie in [0, 1), got {self.hue_mean}")
        for name in ("sat_mean", "val_mean"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        for name in ("hue_spread", "sat_spread", "val_spread"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be > 0, got {v}")


@dataclass(frozen=True)
class BookRecord:
    id: int
    title: str
    height_mm: float
    width_mm: float  # spine thickness, i.e. footprint along the shelf
    depth_mm: float
    author: str
    cover_type: str
    count: int
    spine_color: SpineColorModel

    def __post_init__(self):
        if isinstance(self.id, bool) or not isinstance(self.id, int) or self.id < 0:
            raise ValueError(f"id must be an integer >= 0, got {self.id!r}")
        for name in ("height_mm", "width_mm", "depth_mm"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be strictly positive, got {v}")
        if self.cover_type not in COVER_TYPES:
            raise ValueError(f"cover_type must be one of {COVER_TYPES}, got {self.cover_type!r}")
        if isinstance(self.count, bool) or not isinstance(self.count, int) or self.count < 1:
            raise ValueError(f"count must be an integer >= 1, got {self.count!r}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "BookRecord":
        keys = set(d)
        if keys != _RECORD_KEYS:
            missing, extra = _RECORD_KEYS - keys, keys - _RECORD_KEYS
            raise ValueError(f"bad keys (missing={sorted(missing)}, unexpected={sorted(extra)})")
        color = d["spine_color"]
        if not isinstance(color, dict) or set(color) != _COLOR_KEYS:
            raise ValueError(f"spine_color must have keys {sorted(_COLOR_KEYS)}")
        return cls(
            id=d["id"],
            title=str(d["title"]),
            height_mm=float(d["height_mm"]),
            width_mm=float(d["width_mm"]),
            depth_mm=float(d["depth_mm"]),
            author=str(d["author"]),
            cover_type=d["cover_type"],
            count=d["count"],
            spine_color=SpineColorModel(**{k: float(v) for k, v in color.items()}),
        )


def parse_records(raw) -> list[BookRecord]:
    """Validate a decoded JSON array into records. Errors name the offending index."""
    if not isinstance(raw, list):
        raise DatabaseError("database must be a JSON array of book objects")
    records = []
    seen: dict[int, int] = {}
    for i, item in enumerate(raw):
        if not isinstance(item, dict):
            raise DatabaseError(f"record {i}: expected an object")
        try:
            rec = BookRecord.from_dict(item)
        except (TypeError, ValueError) as e:
            raise DatabaseError(f"record {i}: {e}") from None
        if rec.id in seen:
            raise DatabaseError(f"record {i}: duplicate id {rec.id} (first at record {seen[rec.id]})")
        seen[rec.id] = i
        records.append(rec)
    return records


def load_database(path) -> list[BookRecord]:
    path = Path(path)
    if not path.is_file():
        raise DatabaseError(f"database file not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise DatabaseError(f"cannot parse {path}: {e}") from None
    return parse_records(raw)


def dump_database(db: Sequence[BookRecord]) -> str:
    return json.dumps([r.to_dict() for r in db], indent=2)


def save_database(db: Sequence[BookRecord], path) -> None:
    Path(path).write_text(dump_database(db) + "\n")


def lookup(db: Sequence[BookRecord], book_id: int) -> BookRecord:
    for rec in db:
        if rec.id == book_id:
            return rec
    raise UnknownBookError(book_id)
