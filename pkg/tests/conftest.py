import json
from pathlib import Path

import numpy as np
import pytest

from librarian.bookdb import BookRecord, SpineColorModel, load_database
from librarian.geometry import CameraModel, RigidTransform, ShelfGeometry
from librarian.serialize import load_scenario
from librarian.simulator import ShelfScene

DATA = Path(__file__).resolve().parents[1] / "data"


def make_book(book_id, height=200.0, width=40.0, hue=0.1, sat=0.6, title=None):
    return BookRecord(
        id=book_id,
        title=title or f"Book {book_id}",
        height_mm=height,
        width_mm=width,
        depth_mm=150.0,
        author="Anon",
        cover_type="hard",
        count=1,
        spine_color=SpineColorModel(hue, 0.02, sat, 0.05, 0.5, 0.08),
    )


def make_shelf(width=800.0, height=300.0, n_levels=2):
    return ShelfGeometry(RigidTransform(), width, height, 250.0, n_levels)


def make_camera():
    # 1.2 m in front of the shelf centre, image y pointing down
    return CameraModel(600.0, (640.0, 360.0),
                       RigidTransform(np.diag([1.0, -1.0, -1.0]), [-400.0, 300.0, 1200.0]))


def make_scene(placements, **kw):
    return ShelfScene(make_shelf(**kw), make_camera(), list(placements))


@pytest.fixture
def demo_db():
    return load_database(DATA / "books.json")


@pytest.fixture
def demo_scenario(demo_db):
    return load_scenario(DATA / "demo_scenario.json", demo_db)


@pytest.fixture
def demo_paths():
    return DATA / "books.json", DATA / "demo_scenario.json"


@pytest.fixture
def three_books():
    return [make_book(1, 150.0, hue=0.05), make_book(2, 200.0, hue=0.35), make_book(3, 180.0, hue=0.65)]


@pytest.fixture
def write_json(tmp_path):
    def _write(name, obj):
        p = tmp_path / name
        p.write_text(json.dumps(obj))
        return p
    return _write


# -- acceptance summary: one PASS/FAIL line per criterion -------------------

_CRITERIA: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(num, title): acceptance criterion")


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None or call.when not in ("setup", "call"):
        return
    num, title = marker.args
    ok = call.excinfo is None
    prev = _CRITERIA.get(num, (title, True))
    _CRITERIA[num] = (title, prev[1] and ok)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        title, ok = _CRITERIA[num]
        terminalreporter.write_line(f"AC{num} {'PASS' if ok else 'FAIL'}  {title}")
