from __future__ import annotations

from dataclasses import dataclass, fields


@dataclass(frozen=True)
class PipelineConfig:
    """Tunable knobs of the perceive/plan/execute loop.

    ``window`` and ``prune_min`` follow the published pipeline. ``margin_mm``,
    ``gap_mm`` and ``lean_tolerance_mm`` are artifact defaults with no
    published value. ``min_match_score`` is off (None) by default.
    """

    window: int = 10
    prune_min: int = 4
    margin_mm: float = 20.0
    gap_mm: float = 5.0
    lean_tolerance_mm: float = 30.0
    target_level: int = 0
    sort_property: str = "height"
    min_match_score: float | None = None
    reference_samples: int = 2000

    def __post_init__(self):
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if self.prune_min < 1:
            raise ValueError("prune_min must be >= 1")
        if self.margin_mm < 0 or self.gap_mm < 0 or self.lean_tolerance_mm < 0:
            raise ValueError("margin_mm, gap_mm and lean_tolerance_mm must be >= 0")
        if self.reference_samples < 1:
            raise ValueError("reference_samples must be >= 1")

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)
