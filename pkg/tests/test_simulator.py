import numpy as np
import pytest

from librarian.fusion import UNKNOWN
from librarian.geometry import project_point
from librarian.planner import Plan, PlanAction, PlacePose
from librarian.simulator import (
    ActionResult,
    NoiseModel,
    Placement,
    SceneError,
    execute_action,
    run_episode,
    synth_observation,
    true_position,
    validate_scene,
)

from conftest import make_book, make_scene

DB = [make_book(1, 150, 40, hue=0.05), make_book(2, 200, 35, hue=0.35), make_book(3, 180, 30, hue=0.65)]


def upper_scene():
    return make_scene([Placement(1, 1, 100.0), Placement(2, 1, 200.0), Placement(3, 1, 300.0)])


def pp(book_id, x, level=0, lean="left"):
    return PlanAction("pick_place", book_id, PlacePose(x, level, lean))


class TestSynth:
    def test_noiseless_exact(self):
        scene = upper_scene()
        o = synth_observation(scene, DB, NoiseModel(seed=1), 0)
        assert len(o.detections) == 3
        for d, p in zip(o.detections, scene.placements):
            np.testing.assert_array_equal(d.position, true_position(p, scene.shelf, DB))
            assert d.book_id == p.book_id
            assert 1.0 < d.confidence <= 1.2

    def test_polygon_is_projected_spine(self):
        scene = upper_scene()
        d = synth_observation(scene, DB, NoiseModel(seed=1), 0).detections[0]
        x0, y0 = 100.0, 300.0
        corners = [(x0, y0 + 150, 0), (x0 + 40, y0 + 150, 0), (x0 + 40, y0, 0), (x0, y0, 0)]
        expect = [project_point(scene.camera, c) for c in corners]
        np.testing.assert_allclose(d.polygon_px, expect, atol=1e-9)

    def test_full_dropout(self):
        o = synth_observation(upper_scene(), DB, NoiseModel(dropout_prob=1.0), 3)
        assert o.detections == ()
        assert o.seq == 3

    def test_deterministic(self):
        noise = NoiseModel(pos_sigma_mm=5, dropout_prob=0.3, seed=9)
        a = synth_observation(upper_scene(), DB, noise, 4)
        b = synth_observation(upper_scene(), DB, noise, 4)
        assert len(a.detections) == len(b.detections)
        for x, y in zip(a.detections, b.detections):
            assert x.position.tobytes() == y.position.tobytes()
            assert x.polygon_px == y.polygon_px
            assert x.histogram == y.histogram
            assert (x.book_id, x.confidence) == (y.book_id, y.confidence)

    def test_jitter_truncated(self):
        scene = upper_scene()
        truth = {p.book_id: true_position(p, scene.shelf, DB) for p in scene.placements}
        for seq in range(50):
            o = synth_observation(scene, DB, NoiseModel(pos_sigma_mm=5, seed=2), seq)
            for d in o.detections:
                assert np.abs(d.position - truth[d.book_id]).max() <= 20.0 + 1e-9
                assert d.position[2] == 0.0

    def test_lying_books_unseen(self):
        scene = make_scene([Placement(1, 1, 100.0, standing=False), Placement(2, 1, 200.0)])
        o = synth_observation(scene, DB, NoiseModel(), 0)
        assert [d.book_id for d in o.detections] == [2]

    def test_more_detections_than_books(self):
        db = DB[:2]
        scene = make_scene([Placement(1, 1, 100.0), Placement(2, 1, 200.0)])
        o = synth_observation(scene, db, NoiseModel(), 0)
        assert len(o.detections) == 2
        o = synth_observation(scene, db, NoiseModel(), 0, candidates=db[:1])
        assert sorted(d.book_id for d in o.detections) == [UNKNOWN, 1]
        assert [d.confidence for d in o.detections if d.book_id == UNKNOWN] == [0.0]


class TestExecute:
    def test_place_against_wall(self):
        scene = upper_scene()
        res = execute_action(scene, pp(2, 20), DB)
        assert res.ok and res.failure_reason is None
        assert scene.placements[1] == Placement(2, 0, 20.0, True, True)

    def test_not_standing(self):
        scene = make_scene([Placement(1, 1, 100.0, standing=False)])
        before = scene.snapshot()
        assert execute_action(scene, pp(1, 20), DB) == ActionResult(False, "not_standing")
        assert scene.snapshot() == before

    def test_spine_not_aligned(self):
        scene = make_scene([Placement(1, 1, 100.0, spine_aligned=False)])
        assert execute_action(scene, pp(1, 20), DB).failure_reason == "spine_not_aligned"

    def test_support_too_short(self):
        db = [make_book(1, 150, 40), make_book(2, 200, 40)]
        scene = make_scene([Placement(1, 0, 20.0), Placement(2, 1, 100.0)])
        res = execute_action(scene, pp(2, 65), db, lean_tolerance_mm=30)
        assert res.failure_reason == "support_too_short"
        # within tolerance is fine
        assert execute_action(scene, pp(2, 65), db, lean_tolerance_mm=50).ok

    def test_out_of_bounds(self):
        scene = upper_scene()
        assert execute_action(scene, pp(1, 790), DB).failure_reason == "out_of_bounds"
        assert execute_action(scene, pp(1, 20, level=5), DB).failure_reason == "out_of_bounds"
        # slot occupied by another book
        assert execute_action(scene, pp(1, 190, level=1), DB).failure_reason == "out_of_bounds"

    def test_unknown_book(self):
        assert execute_action(upper_scene(), pp(42, 20), DB).failure_reason == "unknown_book"

    def test_perception_toggles(self):
        scene = upper_scene()
        assert execute_action(scene, PlanAction("perception_stop"), DB).ok
        assert scene.perception_active is False
        assert execute_action(scene, PlanAction("perception_start"), DB).ok
        assert scene.perception_active is True

    def test_result_invariant(self):
        with pytest.raises(ValueError):
            ActionResult(False)
        with pytest.raises(ValueError):
            ActionResult(True, "not_standing")


def plan_of(*picks):
    return Plan((PlanAction("perception_stop"), *picks, PlanAction("perception_start")))


class TestEpisode:
    def test_sorting_three_books(self):
        plan = plan_of(pp(2, 20), pp(3, 60), pp(1, 95))
        log, final = run_episode(upper_scene(), plan, DB)
        assert log.completed and log.actions_ok == 5
        order = [p.book_id for p in final.on_level(0)]
        assert order == [2, 3, 1]
        assert len(log.steps) == 5
        assert log.steps[0].perception_active is False
        assert log.steps[-1].perception_active is True

    def test_fabricated_id_halts(self):
        plan = plan_of(pp(2, 20), pp(99, 60), pp(1, 95))
        log, final = run_episode(upper_scene(), plan, DB)
        assert log.halted_at == 2
        assert log.steps[-1].failure_reason == "unknown_book"
        assert len(log.steps) == 3
        assert [p.book_id for p in final.on_level(0)] == [2]

    def test_empty_plan(self):
        scene = upper_scene()
        log, final = run_episode(scene, plan_of(), DB)
        assert log.completed
        assert final.snapshot() == scene.snapshot()

    def test_input_scene_untouched(self):
        scene = upper_scene()
        before = scene.snapshot()
        run_episode(scene, plan_of(pp(2, 20)), DB)
        assert scene.snapshot() == before


def test_validate_scene():
    validate_scene(upper_scene(), DB)
    with pytest.raises(SceneError, match="overlapping"):
        validate_scene(make_scene([Placement(1, 1, 100.0), Placement(2, 1, 120.0)]), DB)
    with pytest.raises(SceneError, match="outside"):
        validate_scene(make_scene([Placement(1, 1, 780.0)]), DB)
    with pytest.raises(SceneError, match="unknown"):
        validate_scene(make_scene([Placement(8, 1, 10.0)]), DB)
    with pytest.raises(SceneError, match="more than once"):
        validate_scene(make_scene([Placement(1, 1, 10.0), Placement(1, 0, 10.0)]), DB)
