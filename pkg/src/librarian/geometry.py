"""Pinhole projection, shelf corners and 4-point perspective transforms.

World and shelf frames are in millimetres; image frames in pixels. The
rectified frame of a shelf level is the axis-aligned rectangle
(0, 0)-(level_width_mm, level_height_mm) with the top-left corner at the
origin and v growing downwards, like an image.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

import numpy as np

DET_EPS = 1e-12
W_EPS = 1e-12
ORTHO_TOL = 1e-9


class GeometryError(ValueError):
    pass


class DegenerateConfigurationError(GeometryError):
    """Three of the four correspondences are collinear."""


def _as_point(p, dim: int) -> np.ndarray:
    a = np.asarray(p, dtype=float).reshape(-1)
    if a.shape != (dim,):
        raise GeometryError(f"expected a {dim}-vector, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise GeometryError(f"non-finite point {a}")
    return a


@dataclass(frozen=True)
class RigidTransform:
    """x' = R x + t."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        r = np.array(self.rotation, dtype=float).reshape(3, 3)
        t = np.array(self.translation, dtype=float).reshape(3)
        if not np.allclose(r @ r.T, np.eye(3), atol=ORTHO_TOL, rtol=0):
            raise GeometryError("rotation is not orthonormal")
        if np.linalg.det(r) < 0:
            raise GeometryError("rotation has negative determinant")
        r.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    def apply(self, p) -> np.ndarray:
        return self.rotation @ _as_point(p, 3) + self.translation

    def to_dict(self) -> dict:
        return {"rotation": self.rotation.tolist(), "translation": self.translation.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "RigidTransform":
        return cls(np.asarray(d["rotation"], float), np.asarray(d["translation"], float))


@dataclass(frozen=True)
class CameraModel:
    focal_px: float
    principal_point: tuple[float, float]
    pose: RigidTransform  # world -> camera

    def __post_init__(self):
        if not (np.isfinite(self.focal_px) and self.focal_px > 0):
            raise GeometryError(f"focal_px must be > 0, got {self.focal_px}")
        pp = _as_point(self.principal_point, 2)
        object.__setattr__(self, "principal_point", (float(pp[0]), float(pp[1])))

    def to_dict(self) -> dict:
        return {
            "focal_px": self.focal_px,
            "principal_point": list(self.principal_point),
            "pose": self.pose.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CameraModel":
        return cls(float(d["focal_px"]), tuple(d["principal_point"]), RigidTransform.from_dict(d["pose"]))


@dataclass(frozen=True)
class ShelfGeometry:
    """A stack of identical levels. Shelf frame: x along the level, y up, z out of the front plane."""

    origin_pose: RigidTransform  # shelf -> world
    level_width_mm: float
    level_height_mm: float
    level_depth_mm: float
    n_levels: int = 1

    def __post_init__(self):
        for name in ("level_width_mm", "level_height_mm", "level_depth_mm"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise GeometryError(f"{name} must be > 0, got {v}")
        if self.n_levels < 1:
            raise GeometryError("n_levels must be >= 1")

    def check_level(self, level: int) -> None:
        if not 0 <= level < self.n_levels:
            raise GeometryError(f"level {level} out of range [0, {self.n_levels})")

    def to_dict(self) -> dict:
        return {
            "origin_pose": self.origin_pose.to_dict(),
            "level_width_mm": self.level_width_mm,
            "level_height_mm": self.level_height_mm,
            "level_depth_mm": self.level_depth_mm,
            "n_levels": self.n_levels,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ShelfGeometry":
        return cls(
            RigidTransform.from_dict(d["origin_pose"]),
            float(d["level_width_mm"]),
            float(d["level_height_mm"]),
            float(d["level_depth_mm"]),
            int(d["n_levels"]),
        )


def shelf_level_corners(shelf: ShelfGeometry, level: int) -> list[np.ndarray]:
    """Front-plane corners of a level in world frame, ordered TL, TR, BR, BL."""
    shelf.check_level(level)
    w, h = shelf.level_width_mm, shelf.level_height_mm
    y0 = level * h
    local = [(0.0, y0 + h, 0.0), (w, y0 + h, 0.0), (w, y0, 0.0), (0.0, y0, 0.0)]
    return [shelf.origin_pose.apply(p) for p in local]


def rectified_corners(shelf: ShelfGeometry) -> list[np.ndarray]:
    """TL, TR, BR, BL of the rectified level frame."""
    w, h = shelf.level_width_mm, shelf.level_height_mm
    return [np.array(p, dtype=float) for p in ((0.0, 0.0), (w, 0.0), (w, h), (0.0, h))]


def project_point(cam: CameraModel, p) -> np.ndarray:
    pc = cam.pose.apply(p)
    if pc[2] <= 0:
        raise GeometryError(f"point {np.asarray(p).tolist()} is at or behind the camera plane")
    cx, cy = cam.principal_point
    return np.array([cam.focal_px * pc[0] / pc[2] + cx, cam.focal_px * pc[1] / pc[2] + cy])


@dataclass(frozen=True)
class Homography:
    m: np.ndarray

    def __post_init__(self):
        m = np.array(self.m, dtype=float).reshape(3, 3)
        if not np.all(np.isfinite(m)):
            raise GeometryError("homography has non-finite entries")
        if m[2, 2] != 0:
            m = m / m[2, 2]
        if abs(np.linalg.det(m)) <= DET_EPS:
            raise GeometryError("homography is singular")
        m.setflags(write=False)
        object.__setattr__(self, "m", m)

    @classmethod
    def identity(cls) -> "Homography":
        return cls(np.eye(3))


def _conditioning(pts: np.ndarray) -> np.ndarray:
    # similarity moving the centroid to 0 and the mean distance to sqrt(2)
    c = pts.mean(axis=0)
    d = np.sqrt(((pts - c) ** 2).sum(axis=1)).mean()
    s = np.sqrt(2.0) / d
    return np.array([[s, 0, -s * c[0]], [0, s, -s * c[1]], [0, 0, 1.0]])


def _check_general_position(pts: np.ndarray, name: str, tol: float = 1e-9) -> None:
    # pts are conditioned, so an absolute tolerance is scale-free
    for i, j, k in combinations(range(4), 3):
        a, b, c = pts[i], pts[j], pts[k]
        cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        if abs(cross) <= tol:
            raise DegenerateConfigurationError(f"{name} points {i}, {j}, {k} are collinear")


def fit_homography(src: Sequence, dst: Sequence) -> Homography:
    """Exact homography through four correspondences (8x8 linear solve, h33 = 1).

    Points are conditioned before solving and the result is mapped back.
    """
    s = np.array([_as_point(p, 2) for p in src])
    d = np.array([_as_point(p, 2) for p in dst])
    if s.shape != (4, 2) or d.shape != (4, 2):
        raise GeometryError("fit_homography needs exactly 4 source and 4 destination points")
    if np.ptp(s, axis=0).max() == 0 or np.ptp(d, axis=0).max() == 0:
        raise DegenerateConfigurationError("coincident points")
    ts, td = _conditioning(s), _conditioning(d)
    sn = (ts[:2, :2] @ s.T).T + ts[:2, 2]
    dn = (td[:2, :2] @ d.T).T + td[:2, 2]
    _check_general_position(sn, "source")
    _check_general_position(dn, "destination")

    a = np.zeros((8, 8))
    b = np.zeros(8)
    for i, ((x, y), (u, v)) in enumerate(zip(sn, dn)):
        a[2 * i] = [x, y, 1, 0, 0, 0, -u * x, -u * y]
        a[2 * i + 1] = [0, 0, 0, x, y, 1, -v * x, -v * y]
        b[2 * i], b[2 * i + 1] = u, v
    try:
        h = np.linalg.solve(a, b)
    except np.linalg.LinAlgError:
        raise DegenerateConfigurationError("singular correspondence system") from None
    hn = np.append(h, 1.0).reshape(3, 3)
    m = np.linalg.solve(td, hn @ ts)
    return Homography(m)


def apply_homography(h: Homography, p) -> np.ndarray:
    x = _as_point(p, 2)
    q = h.m @ np.array([x[0], x[1], 1.0])
    if abs(q[2]) < W_EPS:
        raise GeometryError(f"point {x.tolist()} maps to the line at infinity")
    return q[:2] / q[2]


def invert_homography(h: Homography) -> Homography:
    try:
        inv = np.linalg.inv(h.m)
    except np.linalg.LinAlgError:
        raise GeometryError("homography is singular") from None
    return Homography(inv)


def unrectify_polygon(h_inv: Homography, poly: Sequence) -> list[np.ndarray]:
    return [apply_homography(h_inv, p) for p in poly]


def level_rectification(cam: CameraModel, shelf: ShelfGeometry, level: int) -> Homography:
    """Image -> rectified-level homography anchored on the projected level corners."""
    img = [project_point(cam, c) for c in shelf_level_corners(shelf, level)]
    return fit_homography(img, rectified_corners(shelf))
