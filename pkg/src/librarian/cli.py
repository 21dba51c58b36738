"""Command-line runner: ``librarian perceive | plan | run | report``.

Exit status: 0 success, 2 bad input, 3 shelf overflow while planning,
4 episode halted on a failed action.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import logging
import sys
from pathlib import Path

from librarian.bookdb import DatabaseError, load_database
from librarian.planner import ShelfOverflowError
from librarian.pipeline import perceive, plan_for, resolve_seed, run
from librarian.report import render_belief_table, render_rows
from librarian.serialize import (
    FormatError,
    dumps,
    load_scenario,
    read_belief,
    write_belief,
    write_observations,
    write_plan,
)

EXIT_OK, EXIT_INPUT, EXIT_OVERFLOW, EXIT_HALTED = 0, 2, 3, 4

log = logging.getLogger("librarian")


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_perceive(args) -> int:
    db = load_database(args.db)
    sc = load_scenario(args.scenario, db)
    obs, belief = perceive(sc, db, args.seed, args.window)
    out = _out_dir(args)
    write_observations(obs, out / "observations.jsonl")
    write_belief(belief, out / "belief.json")
    print(render_belief_table(belief, db))
    return EXIT_OK


def cmd_plan(args) -> int:
    db = load_database(args.db)
    sc = load_scenario(args.scenario, db)
    belief = read_belief(args.belief)
    try:
        plan = plan_for(sc, belief, db)
    except ShelfOverflowError as e:
        print(f"error: shelf overflow: {e}", file=sys.stderr)
        return EXIT_OVERFLOW
    write_plan(plan, _out_dir(args) / "plan.json")
    print(f"{len(plan.actions)} actions")
    return EXIT_OK


def cmd_run(args) -> int:
    db = load_database(args.db)
    sc = load_scenario(args.scenario, db)
    try:
        res = run(sc, db, args.seed, args.window)
    except ShelfOverflowError as e:
        print(f"error: shelf overflow: {e}", file=sys.stderr)
        return EXIT_OVERFLOW
    out = _out_dir(args)
    write_observations(res.observations, out / "observations.jsonl")
    write_belief(res.belief, out / "belief.json")
    write_plan(res.plan, out / "plan.json")
    (out / "episode.json").write_text(dumps(res.log.to_dict()))
    doc = res.report.to_dict()
    doc["seed"] = resolve_seed(sc, args.seed)
    if not args.no_timestamp:
        doc["generated_at"] = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    (out / "report.json").write_text(dumps(doc))

    print(render_rows(res.report.belief_table))
    s = res.report.episode_summary
    print(f"\nactions ok: {s['actions_ok']}/{s['actions_total']}")
    if s["halted_at"] is not None:
        print(f"halted at action {s['halted_at']}: {s['failure_reason']}")
    print("final order:", ", ".join(f"{b}@{x:g}mm" for b, x in res.report.final_order) or "(empty)")
    return EXIT_OK if res.log.completed else EXIT_HALTED


def cmd_report(args) -> int:
    db = load_database(args.db)
    if args.belief:
        print(render_belief_table(read_belief(args.belief), db))
        return EXIT_OK
    path = Path(args.report)
    try:
        doc = json.loads(path.read_text())
        rows = doc["belief_table"]
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as e:
        raise FormatError(f"cannot read report {path}: {e}") from None
    print(render_rows(rows))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="librarian", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, scenario=True, out=True):
        sp.add_argument("--db", required=True, help="books.json")
        if scenario:
            sp.add_argument("--scenario", required=True, help="scenario.json")
        if out:
            sp.add_argument("--out", default="out", help="output directory (default: out)")

    sp = sub.add_parser("perceive", help="synthesise observations and fuse them into a belief")
    common(sp)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--window", type=int, default=None, help="observations per belief (default: scenario config, 10)")
    sp.set_defaults(func=cmd_perceive)

    sp = sub.add_parser("plan", help="plan the sorted re-shelving for a belief")
    common(sp)
    sp.add_argument("--belief", required=True, help="belief.json from 'perceive'")
    sp.set_defaults(func=cmd_plan)

    sp = sub.add_parser("run", help="perceive, plan and execute end to end")
    common(sp)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--window", type=int, default=None, help="observations per belief (default: scenario config, 10)")
    sp.add_argument("--no-timestamp", action="store_true", help="omit generated_at from report.json")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("report", help="print the belief table")
    common(sp, scenario=False, out=False)
    g = sp.add_mutually_exclusive_group(required=True)
    g.add_argument("--belief")
    g.add_argument("--report")
    sp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    if getattr(args, "window", None) is not None and args.window < 1:
        print("error: --window must be >= 1", file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except (DatabaseError, FormatError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
