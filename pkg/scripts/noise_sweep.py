"""Belief accuracy over a grid of position noise and dropout.

For each (sigma, dropout) cell, runs N seeded trials of the demo scene and
reports the fraction of trials whose belief has exactly the true books with
correct ids, plus the mean centroid error.

    python scripts/noise_sweep.py --trials 50
"""

import argparse
from dataclasses import replace
from pathlib import Path

import numpy as np

from librarian.bookdb import load_database
from librarian.fusion import build_belief
from librarian.serialize import load_scenario
from librarian.simulator import synth_window, true_position

ROOT = Path(__file__).resolve().parents[1]


def trial(sc, db, sigma, dropout, seed):
    noise = replace(sc.noise, pos_sigma_mm=sigma, dropout_prob=dropout, seed=seed)
    obs = synth_window(sc.scene, db, noise, sc.config.window)
    belief = build_belief(obs, db, seed=seed, window=sc.config.window, prune_min=sc.config.prune_min)
    truth = {p.book_id: true_position(p, sc.scene.shelf, db) for p in sc.scene.placements if p.standing}
    if sorted(belief.ids()) != sorted(truth):
        return False, np.nan
    err = np.mean([np.linalg.norm(c.centroid - truth[c.book_id]) for c in belief.clusters])
    return True, err


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--db", default=ROOT / "data" / "books.json")
    ap.add_argument("--scenario", default=ROOT / "data" / "demo_scenario.json")
    ap.add_argument("--trials", type=int, default=50)
    ap.add_argument("--sigmas", type=float, nargs="+", default=[0.0, 2.0, 5.0, 10.0, 20.0])
    ap.add_argument("--dropouts", type=float, nargs="+", default=[0.0, 0.1, 0.3, 0.5])
    args = ap.parse_args()

    db = load_database(args.db)
    sc = load_scenario(args.scenario, db)
    print(f"{'sigma_mm':>8} {'dropout':>7} {'correct':>8} {'centroid_err_mm':>15}")
    for sigma in args.sigmas:
        for dropout in args.dropouts:
            results = [trial(sc, db, sigma, dropout, s) for s in range(args.trials)]
            ok = np.mean([r[0] for r in results])
            errs = [r[1] for r in results if r[0]]
            err = np.mean(errs) if errs else float("nan")
            print(f"{sigma:8.1f} {dropout:7.2f} {ok:8.0%} {err:15.2f}")


if __name__ == "__main__":
    main()
