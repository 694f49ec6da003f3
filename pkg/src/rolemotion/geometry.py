"""Small geometric helpers: transforms, boxes, spherical angles."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _pure


def unit(v, eps: float = 1e-12) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    n = float(np.linalg.norm(v))
    if n < eps:
        raise ValueError("cannot normalise a near-zero vector")
    return v / n


def rot_about(axis, angle: float) -> np.ndarray:
    """3x3 rotation about a unit axis."""
    a = unit(axis)
    return np.array(_pure.rot_axis(a[0], a[1], a[2], float(angle)),
                    dtype=np.float64).reshape(3, 3)


def rot_z(angle: float) -> np.ndarray:
    return rot_about((0.0, 0.0, 1.0), angle)


def azimuth_deg(v) -> float:
    """Heading of v in the horizontal plane, degrees in (-180, 180].

    0 is +x (robot forward), +90 is +y (robot left).  Undefined (returns 0)
    when v is vertical.
    """
    x = float(v[0])
    y = float(v[1])
    if x == 0.0 and y == 0.0:
        return 0.0
    a = math.degrees(math.atan2(y, x))
    if a <= -180.0:
        a = 180.0
    return a


def elevation_deg(v) -> float:
    """Angle of v above the horizontal plane, degrees in [-90, 90]."""
    x = float(v[0])
    y = float(v[1])
    z = float(v[2])
    h = math.hypot(x, y)
    return math.degrees(math.atan2(z, h))


def spherical_unit(azimuth_degrees: float, elevation_degrees: float) -> np.ndarray:
    a = math.radians(azimuth_degrees)
    e = math.radians(elevation_degrees)
    return np.array([math.cos(e) * math.cos(a),
                     math.cos(e) * math.sin(a),
                     math.sin(e)], dtype=np.float64)


@dataclass(frozen=True)
class Transform:
    """Rigid transform: world = rot @ local + pos."""

    rot: np.ndarray
    pos: np.ndarray

    @staticmethod
    def identity() -> "Transform":
        return Transform(np.eye(3), np.zeros(3))

    def apply(self, point) -> np.ndarray:
        return self.rot @ np.asarray(point, dtype=np.float64) + self.pos

    def apply_vector(self, v) -> np.ndarray:
        return self.rot @ np.asarray(v, dtype=np.float64)

    def compose(self, other: "Transform") -> "Transform":
        return Transform(self.rot @ other.rot, self.rot @ other.pos + self.pos)

    def inverse(self) -> "Transform":
        rt = self.rot.T.copy()
        return Transform(rt, -(rt @ self.pos))


@dataclass(frozen=True)
class Box:
    """Solid oriented box: rot is world-from-box, half are half-extents."""

    rot: np.ndarray
    center: np.ndarray
    half: np.ndarray

    @staticmethod
    def from_bounds(lo, hi) -> "Box":
        lo = np.asarray(lo, dtype=np.float64)
        hi = np.asarray(hi, dtype=np.float64)
        if np.any(hi <= lo):
            raise ValueError(f"degenerate box bounds {lo} .. {hi}")
        return Box(np.eye(3), (lo + hi) * 0.5, (hi - lo) * 0.5)

    def transformed(self, t: Transform) -> "Box":
        return Box(t.rot @ self.rot, t.apply(self.center), self.half.copy())

    def as_row(self) -> np.ndarray:
        """Flat 15-vector layout used by the distance kernels."""
        return np.concatenate([self.rot.reshape(9), self.center, self.half])

    def contains(self, point, margin: float = 0.0) -> bool:
        local = self.rot.T @ (np.asarray(point, dtype=np.float64) - self.center)
        return bool(np.all(np.abs(local) <= self.half + margin))


def boxes_as_rows(boxes) -> np.ndarray:
    if not boxes:
        return np.zeros((0, 15), dtype=np.float64)
    return np.stack([b.as_row() for b in boxes])
