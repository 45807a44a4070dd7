"""Planar geometry primitives shared by mapping, sensing and planning."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * math.pi


def wrap_angle(a: float) -> float:
    """Normalize an angle to (-pi, pi]."""
    a = math.fmod(a, TWO_PI)
    if a <= -math.pi:
        a += TWO_PI
    elif a > math.pi:
        a -= TWO_PI
    return a


@dataclass
class Pose:
    """Agent pose: planar position, heading, and camera pitch.

    The pitch is carried only so look actions have something to act on;
    planar sensing ignores it.
    """

    x: float
    y: float
    yaw: float = 0.0
    camera_pitch: float = 0.0

    def __post_init__(self) -> None:
        self.yaw = wrap_angle(self.yaw)

    @property
    def xy(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=float)

    def heading(self) -> np.ndarray:
        return np.array([math.cos(self.yaw), math.sin(self.yaw)], dtype=float)

    def moved(self, dist: float) -> "Pose":
        return Pose(
            self.x + dist * math.cos(self.yaw),
            self.y + dist * math.sin(self.yaw),
            self.yaw,
            self.camera_pitch,
        )

    def turned(self, dyaw: float) -> "Pose":
        return Pose(self.x, self.y, wrap_angle(self.yaw + dyaw), self.camera_pitch)


def segments_array(segs) -> np.ndarray:
    """Coerce a sequence of (x1, y1, x2, y2) into a float array of shape (N, 4)."""
    arr = np.asarray(segs, dtype=float)
    if arr.size == 0:
        return arr.reshape(0, 4)
    return arr.reshape(-1, 4)


def ray_segments_hit(origin: np.ndarray, angle: float, segments: np.ndarray,
                     max_range: float) -> float:
    """Distance from origin along `angle` to the first segment hit.

    Returns max_range when nothing is hit within range.
    """
    if segments.shape[0] == 0:
        return max_range
    d = np.array([math.cos(angle), math.sin(angle)])
    p1 = segments[:, 0:2]
    e = segments[:, 2:4] - p1
    # origin + t*d == p1 + u*e, solved per segment by 2x2 determinant
    denom = d[0] * (-e[:, 1]) - d[1] * (-e[:, 0])
    rel = p1 - origin
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (rel[:, 0] * (-e[:, 1]) - rel[:, 1] * (-e[:, 0])) / denom
        u = (d[0] * rel[:, 1] - d[1] * rel[:, 0]) / denom
    ok = (np.abs(denom) > 1e-12) & (t > 1e-9) & (u >= -1e-9) & (u <= 1.0 + 1e-9)
    if not ok.any():
        return max_range
    return float(min(t[ok].min(), max_range))


def rays_segments_hit(origin: np.ndarray, angles: np.ndarray, segments: np.ndarray,
                      max_range: float) -> np.ndarray:
    """Vectorized ray casting: first-hit distance per angle (max_range on miss)."""
    if segments.shape[0] == 0:
        return np.full(angles.shape, max_range)
    dx = np.cos(angles)[:, None]
    dy = np.sin(angles)[:, None]
    p1 = segments[:, 0:2]
    e = segments[:, 2:4] - p1
    rel = (p1 - origin)[None, :, :]
    denom = dx * (-e[None, :, 1]) - dy * (-e[None, :, 0])
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (rel[:, :, 0] * (-e[None, :, 1]) - rel[:, :, 1] * (-e[None, :, 0])) / denom
        u = (dx * rel[:, :, 1] - dy * rel[:, :, 0]) / denom
    ok = (np.abs(denom) > 1e-12) & (t > 1e-9) & (u >= -1e-9) & (u <= 1.0 + 1e-9)
    t = np.where(ok, t, np.inf)
    return np.minimum(t.min(axis=1), max_range)


def point_segments_distance(p: np.ndarray, segments: np.ndarray) -> float:
    """Minimum distance from a point to a set of segments."""
    if segments.shape[0] == 0:
        return math.inf
    return float(points_segments_distance(p[None, :], segments)[0])


def points_segments_distance(pts: np.ndarray, segments: np.ndarray) -> np.ndarray:
    """Per-point minimum distance to any segment. pts: (M, 2)."""
    if segments.shape[0] == 0:
        return np.full(pts.shape[0], np.inf)
    a = segments[:, 0:2][None, :, :]
    b = segments[:, 2:4][None, :, :]
    ab = b - a
    ap = pts[:, None, :] - a
    denom = (ab * ab).sum(-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(denom > 0, (ap * ab).sum(-1) / denom, 0.0)
    t = np.clip(t, 0.0, 1.0)
    closest = a + t[:, :, None] * ab
    d = np.linalg.norm(pts[:, None, :] - closest, axis=-1)
    return d.min(axis=1)


def _orient(ax, ay, bx, by, cx, cy):
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


def segment_segments_distance(p: np.ndarray, q: np.ndarray,
                              segments: np.ndarray) -> float:
    """Minimum distance from segment p-q to any segment in the set.

    Zero when an intersection exists; used for swept collision checks.
    """
    if segments.shape[0] == 0:
        return math.inf
    a = segments[:, 0:2]
    b = segments[:, 2:4]
    d1 = _orient(p[0], p[1], q[0], q[1], a[:, 0], a[:, 1])
    d2 = _orient(p[0], p[1], q[0], q[1], b[:, 0], b[:, 1])
    d3 = _orient(a[:, 0], a[:, 1], b[:, 0], b[:, 1], p[0], p[1])
    d4 = _orient(a[:, 0], a[:, 1], b[:, 0], b[:, 1], q[0], q[1])
    crosses = ((d1 * d2) < 0) & ((d3 * d4) < 0)
    if crosses.any():
        return 0.0
    pq = np.stack([p, q])
    cand = [
        points_segments_distance(pq, segments).min(),
        points_segments_distance(a, np.array([[p[0], p[1], q[0], q[1]]])).min(),
        points_segments_distance(b, np.array([[p[0], p[1], q[0], q[1]]])).min(),
    ]
    return float(min(cand))


@dataclass
class Polygon:
    """Simple polygon given by its vertices in order."""

    vertices: np.ndarray

    def __post_init__(self) -> None:
        self.vertices = np.asarray(self.vertices, dtype=float).reshape(-1, 2)

    def edges(self) -> np.ndarray:
        v = self.vertices
        nxt = np.roll(v, -1, axis=0)
        return np.hstack([v, nxt])

    def perimeter_points(self, spacing: float) -> np.ndarray:
        """Points sampled along the boundary at roughly `spacing` apart."""
        pts = []
        for x1, y1, x2, y2 in self.edges():
            ln = math.hypot(x2 - x1, y2 - y1)
            n = max(1, int(math.ceil(ln / spacing)))
            ts = np.arange(n) / n
            pts.append(np.column_stack([x1 + ts * (x2 - x1), y1 + ts * (y2 - y1)]))
        return np.vstack(pts)

    def contains(self, pts: np.ndarray) -> np.ndarray:
        """Even-odd point-in-polygon test, vectorized over points."""
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        v = self.vertices
        n = len(v)
        inside = np.zeros(len(pts), dtype=bool)
        j = n - 1
        for i in range(n):
            xi, yi = v[i]
            xj, yj = v[j]
            cond = (yi > pts[:, 1]) != (yj > pts[:, 1])
            with np.errstate(divide="ignore", invalid="ignore"):
                xcross = (xj - xi) * (pts[:, 1] - yi) / (yj - yi) + xi
            inside ^= cond & (pts[:, 0] < xcross)
            j = i
        return inside

    def distance(self, p: np.ndarray) -> float:
        """Distance from a point to the polygon (zero inside)."""
        p = np.asarray(p, dtype=float)
        if bool(self.contains(p[None, :])[0]):
            return 0.0
        return point_segments_distance(p, self.edges())

    @property
    def centroid(self) -> np.ndarray:
        return self.vertices.mean(axis=0)

    @property
    def area(self) -> float:
        v = self.vertices
        x, y = v[:, 0], v[:, 1]
        return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def rect_polygon(cx: float, cy: float, w: float, h: float) -> Polygon:
    hw, hh = w / 2.0, h / 2.0
    return Polygon(np.array([
        [cx - hw, cy - hh], [cx + hw, cy - hh],
        [cx + hw, cy + hh], [cx - hw, cy + hh],
    ]))
