"""Perceive -> plan -> execute, composed over a scenario."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

from librarian.bookdb import BookRecord
from librarian.fusion import Observation, WorldBelief, build_belief
from librarian.planner import Plan, SortCommand, make_plan
from librarian.report import RunReport, belief_rows
from librarian.serialize import Scenario
from librarian.simulator import EpisodeLog, ShelfScene, run_episode, synth_window


@dataclass
class RunResult:
    observations: list
    belief: WorldBelief
    plan: Plan
    log: EpisodeLog
    final_scene: ShelfScene
    report: RunReport


def resolve_seed(sc: Scenario, seed: int | None) -> int:
    return sc.noise.seed if seed is None else seed


def perceive(sc: Scenario, db: Sequence[BookRecord], seed: int | None = None,
             window: int | None = None) -> tuple[list[Observation], WorldBelief]:
    seed = resolve_seed(sc, seed)
    window = sc.config.window if window is None else window
    noise = replace(sc.noise, seed=seed)
    obs = synth_window(sc.scene, db, noise, window,
                       reference_samples=sc.config.reference_samples, min_score=sc.config.min_match_score)
    belief = build_belief(obs, db, seed=seed, window=window, prune_min=sc.config.prune_min)
    return obs, belief


def plan_for(sc: Scenario, belief: WorldBelief, db: Sequence[BookRecord]) -> Plan:
    cmd = SortCommand(sc.config.sort_property, sc.config.target_level)
    return make_plan(belief, cmd, db, sc.scene.shelf, sc.config.margin_mm, sc.config.gap_mm)


def run(sc: Scenario, db: Sequence[BookRecord], seed: int | None = None, window: int | None = None) -> RunResult:
    obs, belief = perceive(sc, db, seed, window)
    plan = plan_for(sc, belief, db)
    log, final = run_episode(sc.scene, plan, db, sc.config.lean_tolerance_mm)
    halted = log.halted_at
    summary = {
        "actions_total": len(plan.actions),
        "actions_ok": log.actions_ok,
        "halted_at": halted,
        "failure_reason": None if halted is None else log.steps[halted].failure_reason,
    }
    order = [[p.book_id, p.x_mm] for p in final.on_level(sc.config.target_level)]
    report = RunReport(belief_rows(belief, db), summary, order)
    return RunResult(obs, belief, plan, log, final, report)
