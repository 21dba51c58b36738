"""Run report and the text belief table (book id, confidence, estimated dimension, title)."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from librarian.bookdb import BookRecord, UnknownBookError, lookup
from librarian.fusion import UNKNOWN, WorldBelief

TABLE_HEADER = ("id", "confidence", "est. dims (mm)", "title")


@dataclass
class RunReport:
    belief_table: list = field(default_factory=list)
    episode_summary: dict = field(default_factory=dict)
    final_order: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "belief_table": self.belief_table,
            "episode_summary": self.episode_summary,
            "final_order": self.final_order,
        }


def belief_rows(belief: WorldBelief, db: Sequence[BookRecord]) -> list[dict]:
    rows = []
    for c in belief.clusters:
        title = None
        if c.book_id != UNKNOWN:
            try:
                title = lookup(db, c.book_id).title
            except UnknownBookError:
                pass
        rows.append({
            "book_id": None if c.book_id == UNKNOWN else c.book_id,
            "confidence": c.confidence,
            "est_dims_mm": [c.est_width_mm, c.est_height_mm],
            "title": title,
        })
    return rows


def _format_table(rows: list[dict]) -> str:
    cells = [TABLE_HEADER]
    for r in rows:
        w, h = r["est_dims_mm"]
        cells.append((
            "?" if r["book_id"] is None else str(r["book_id"]),
            f"{(r['confidence'] if r['book_id'] is not None else 0.0):.2f}",
            f"{w:.0f} x {h:.0f}",
            r["title"] or "-",
        ))
    widths = [max(len(row[i]) for row in cells) for i in range(len(TABLE_HEADER))]
    lines = ["  ".join(v.ljust(widths[i]) for i, v in enumerate(row)).rstrip() for row in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def render_belief_table(belief: WorldBelief, db: Sequence[BookRecord]) -> str:
    return _format_table(belief_rows(belief, db))


def render_rows(rows: list[dict]) -> str:
    return _format_table(rows)
