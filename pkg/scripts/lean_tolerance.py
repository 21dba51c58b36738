"""How often a random (unsorted) shelving order survives, per lean tolerance.

Shows why the planner sorts tallest first: with height-sorted plans every
support is at least as tall as the book leaned on it, so no tolerance is
needed; random orders fail once the height step exceeds the tolerance.

    python scripts/lean_tolerance.py --episodes 500
"""

import argparse
from pathlib import Path

import numpy as np

from librarian.bookdb import load_database
from librarian.planner import Plan, PlanAction, target_slot
from librarian.serialize import load_scenario
from librarian.simulator import run_episode

ROOT = Path(__file__).resolve().parents[1]


def random_plan(sc, db, rng):
    ids = [p.book_id for p in sc.scene.placements]
    rng.shuffle(ids)
    width = {b.id: b.width_mm for b in db}
    actions, widths = [PlanAction("perception_stop")], []
    for k, i in enumerate(ids):
        pose = target_slot(k, widths, width[i], sc.scene.shelf, sc.config.target_level,
                           sc.config.margin_mm, sc.config.gap_mm)
        actions.append(PlanAction("pick_place", int(i), pose))
        widths.append(width[i])
    actions.append(PlanAction("perception_start"))
    return Plan(tuple(actions))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--db", default=ROOT / "data" / "books.json")
    ap.add_argument("--scenario", default=ROOT / "data" / "demo_scenario.json")
    ap.add_argument("--episodes", type=int, default=500)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    db = load_database(args.db)
    sc = load_scenario(args.scenario, db)
    print(f"{'tolerance_mm':>12} {'success':>8}")
    for tol in (0.0, 10.0, 30.0, 50.0, 80.0):
        rng = np.random.default_rng(args.seed)
        ok = [run_episode(sc.scene, random_plan(sc, db, rng), db, tol)[0].completed for _ in range(args.episodes)]
        print(f"{tol:12.0f} {np.mean(ok):8.0%}")


if __name__ == "__main__":
    main()
