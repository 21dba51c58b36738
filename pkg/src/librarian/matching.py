"""Greedy one-to-one assignment of book ids to score-matrix rows."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from librarian.features import ScoreMatrix


@dataclass(frozen=True)
class Assignment:
    # (row_key, col_key, score) in selection order, i.e. the greedy trace
    pairs: tuple
    unassigned_rows: tuple

    def as_dict(self) -> dict:
        return {r: (c, s) for r, c, s in self.pairs}


def greedy_assign(m: ScoreMatrix, min_score: float | None = None) -> Assignment:
    """Repeatedly take the highest remaining score, then drop its row and column.

    Stops when rows or columns run out; leftover rows are unassigned. Ties go to
    the smallest row index, then the smallest column index. With ``min_score``
    set, the loop stops once the best remaining score falls below it.
    """
    r, c = m.shape
    if r == 0 or c == 0:
        raise ValueError("cannot assign on an empty score matrix")
    work = np.array(m.scores, dtype=float)
    row_live = np.ones(r, bool)
    col_live = np.ones(c, bool)
    pairs = []
    for _ in range(min(r, c)):
        masked = np.where(row_live[:, None] & col_live[None, :], work, -np.inf)
        # argmax returns the first maximum in row-major order
        i, j = np.unravel_index(np.argmax(masked), masked.shape)
        best = float(masked[i, j])
        if min_score is not None and best < min_score:
            break
        pairs.append((m.row_keys[i], m.col_keys[j], best))
        row_live[i] = False
        col_live[j] = False
    unassigned = tuple(m.row_keys[i] for i in range(r) if row_live[i])
    return Assignment(tuple(pairs), unassigned)
