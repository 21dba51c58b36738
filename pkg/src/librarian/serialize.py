"""File formats: scenario.json, observations.jsonl, belief.json, plan.json.

Floats are written with ``repr`` precision, so every load(dump(x)) is exact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from librarian.bookdb import BookRecord
from librarian.config import PipelineConfig
from librarian.features import HsvHistogram
from librarian.fusion import BookCluster, Observation, SpineDetection, WorldBelief
from librarian.geometry import CameraModel, RigidTransform, ShelfGeometry
from librarian.planner import Plan
from librarian.simulator import NoiseModel, Placement, ShelfScene, validate_scene


class FormatError(ValueError):
    """A file does not follow its documented format."""


def _read_json(path):
    path = Path(path)
    if not path.is_file():
        raise FormatError(f"file not found: {path}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise FormatError(f"cannot parse {path}: {e}") from None


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


# -- scenario ---------------------------------------------------------------

@dataclass
class Scenario:
    scene: ShelfScene
    noise: NoiseModel
    config: PipelineConfig


def _pose(d: dict | None) -> RigidTransform:
    if d is None:
        return RigidTransform()
    return RigidTransform(np.asarray(d.get("rotation", np.eye(3)), float), np.asarray(d.get("translation", [0, 0, 0]), float))


def scenario_from_dict(d: dict, db: Sequence[BookRecord]) -> Scenario:
    try:
        s = d["shelf"]
        shelf = ShelfGeometry(
            _pose(s.get("origin_pose")),
            float(s["level_width_mm"]),
            float(s["level_height_mm"]),
            float(s["level_depth_mm"]),
            int(s.get("n_levels", 1)),
        )
        c = d["camera"]
        camera = CameraModel(float(c["focal_px"]), tuple(c["principal_point"]), _pose(c.get("pose")))
        noise = NoiseModel(**d.get("noise", {}))
        config = PipelineConfig.from_dict(d.get("config", {}))
        placements = [
            Placement(int(p["book_id"]), int(p["level"]), float(p["x_mm"]),
                      bool(p.get("standing", True)), bool(p.get("spine_aligned", True)))
            for p in d.get("placements", [])
        ]
    except (KeyError, TypeError, ValueError) as e:
        raise FormatError(f"invalid scenario: {type(e).__name__}: {e}") from None
    scene = ShelfScene(shelf, camera, placements)
    try:
        validate_scene(scene, db)
    except ValueError as e:
        raise FormatError(f"invalid scenario: {e}") from None
    return Scenario(scene, noise, config)


def load_scenario(path, db: Sequence[BookRecord]) -> Scenario:
    d = _read_json(path)
    if not isinstance(d, dict):
        raise FormatError("scenario must be a JSON object")
    return scenario_from_dict(d, db)


def scenario_to_dict(sc: Scenario) -> dict:
    return {
        "shelf": sc.scene.shelf.to_dict(),
        "camera": sc.scene.camera.to_dict(),
        "noise": {
            "pos_sigma_mm": sc.noise.pos_sigma_mm,
            "dropout_prob": sc.noise.dropout_prob,
            "hist_sample_count": sc.noise.hist_sample_count,
            "seed": sc.noise.seed,
        },
        "placements": sc.scene.snapshot(),
        "config": dict(sc.config.__dict__),
    }


# -- observations -----------------------------------------------------------

def detection_to_dict(det: SpineDetection) -> dict:
    return {
        "polygon_px": [list(p) for p in det.polygon_px],
        "position_mm": det.position.tolist(),
        "rect_w_mm": det.rect_width_mm,
        "rect_h_mm": det.rect_height_mm,
        "hist": det.histogram.to_dict(),
        "book_id": det.book_id,
        "confidence": det.confidence,
    }


def detection_from_dict(d: dict) -> SpineDetection:
    return SpineDetection(
        polygon_px=d["polygon_px"],
        position=d["position_mm"],
        rect_width_mm=float(d["rect_w_mm"]),
        rect_height_mm=float(d["rect_h_mm"]),
        histogram=HsvHistogram.from_dict(d["hist"]),
        book_id=int(d["book_id"]),
        confidence=float(d["confidence"]),
    )


def observation_to_dict(o: Observation) -> dict:
    return {"seq": o.seq, "detections": [detection_to_dict(d) for d in o.detections]}


def observation_from_dict(d: dict) -> Observation:
    return Observation(int(d["seq"]), tuple(detection_from_dict(x) for x in d["detections"]))


def write_observations(obs: Iterable[Observation], path) -> None:
    lines = [json.dumps(observation_to_dict(o), sort_keys=True) for o in obs]
    Path(path).write_text("".join(line + "\n" for line in lines))


def read_observations(path) -> list[Observation]:
    path = Path(path)
    if not path.is_file():
        raise FormatError(f"file not found: {path}")
    out, seqs = [], set()
    for n, line in enumerate(path.read_text().splitlines(), 1):
        if not line.strip():
            continue
        try:
            o = observation_from_dict(json.loads(line))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
            raise FormatError(f"{path}:{n}: {e}") from None
        if o.seq in seqs:
            raise FormatError(f"{path}:{n}: duplicate seq {o.seq}")
        seqs.add(o.seq)
        out.append(o)
    return out


# -- belief -----------------------------------------------------------------

def belief_to_dict(b: WorldBelief) -> dict:
    return {
        "source_window": list(b.source_window) if b.source_window is not None else None,
        "clusters": [
            {
                "book_id": c.book_id,
                "confidence": c.confidence,
                "centroid_mm": c.centroid.tolist(),
                "est_width_mm": c.est_width_mm,
                "est_height_mm": c.est_height_mm,
                "n_members": c.n,
                "members": [detection_to_dict(m) for m in c.members],
            }
            for c in b.clusters
        ],
    }


def belief_from_dict(d: dict) -> WorldBelief:
    try:
        clusters = tuple(
            BookCluster(
                members=tuple(detection_from_dict(m) for m in c["members"]),
                centroid=np.asarray(c["centroid_mm"], float),
                book_id=int(c["book_id"]),
                confidence=float(c["confidence"]),
                est_width_mm=float(c["est_width_mm"]),
                est_height_mm=float(c["est_height_mm"]),
            )
            for c in d["clusters"]
        )
        window = d.get("source_window")
        return WorldBelief(clusters, tuple(window) if window is not None else None)
    except (KeyError, TypeError, ValueError) as e:
        raise FormatError(f"invalid belief: {e}") from None


def write_belief(b: WorldBelief, path) -> None:
    Path(path).write_text(dumps(belief_to_dict(b)))


def read_belief(path) -> WorldBelief:
    return belief_from_dict(_read_json(path))


# -- plan -------------------------------------------------------------------

def write_plan(plan: Plan, path) -> None:
    Path(path).write_text(dumps(plan.to_list()))


def read_plan(path) -> Plan:
    raw = _read_json(path)
    try:
        return Plan.from_list(raw)
    except (KeyError, TypeError, ValueError) as e:
        raise FormatError(f"invalid plan: {e}") from None
