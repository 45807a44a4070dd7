"""Per-cell scene-target relevance scores fused across frames.

Each frame carries one scalar relevance score for the whole view. The score
is projected onto the free cells visible from the frame pose, weighted by a
confidence that falls off with angular offset from the optical axis, and
fused against the stored per-cell (score, confidence) pair.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .frontiers import FrontierCluster
from .geometry import Pose, wrap_angle
from .grid import FREE, OCCUPIED, GridMap

SENSE_RANGE = 5.0
FRONTIER_SCORE_RADIUS = 0.5


@dataclass
class FramedScore:
    """One frame's scene-target relevance: pose, scalar score, field of view."""

    pose: Pose
    score: float
    fov: float = math.pi / 2


class SemanticScoreMap:
    """Score/confidence field over the same geometry as the occupancy grid."""

    def __init__(self, grid: GridMap):
        self.resolution = grid.resolution
        self.origin = grid.origin
        self.score = np.zeros((grid.height, grid.width), dtype=np.float64)
        self.conf = np.zeros((grid.height, grid.width), dtype=np.float64)


def angular_confidence(theta: float, fov: float) -> float:
    """Confidence weight cos^2((theta / (fov/2)) * (pi/2)); 1 on-axis, 0 at the rim."""
    half = fov / 2.0
    if abs(theta) > half + 1e-12:
        raise ValueError(f"angular offset {theta} outside field of view {fov}")
    return math.cos((theta / half) * (math.pi / 2.0)) ** 2


def fuse_cell(s_cur: float, c_cur: float, s_pre: float, c_pre: float):
    """Confidence-weighted score average with squared-weighted confidence.

    Returns (s_new, c_new), or None when both confidences are zero (the
    cell is left untouched).
    """
    total = c_cur + c_pre
    if total <= 0.0:
        return None
    s_new = (c_cur * s_cur + c_pre * s_pre) / total
    c_new = (c_cur * c_cur + c_pre * c_pre) / total
    return s_new, c_new


def _visible_depth_sweep(grid: GridMap, pose: Pose, fov: float,
                         max_range: float, n_rays: int = 181) -> np.ndarray:
    """Free-space extent per bearing via batched ray marching on the grid.

    Returns hit distance per ray over [-fov/2, fov/2]; rays stop at the
    first occupied cell, so cells behind obstacles read as not visible.
    """
    angles = pose.yaw + np.linspace(-fov / 2, fov / 2, n_rays)
    step = grid.resolution / 2.0
    ts = np.arange(step, max_range + step, step)
    dx = np.cos(angles)[:, None] * ts[None, :]
    dy = np.sin(angles)[:, None] * ts[None, :]
    px = pose.x + dx
    py = pose.y + dy
    cc = np.floor((px - grid.origin[0]) / grid.resolution).astype(np.int64)
    rr = np.floor((py - grid.origin[1]) / grid.resolution).astype(np.int64)
    inb = (rr >= 0) & (rr < grid.height) & (cc >= 0) & (cc < grid.width)
    occ = np.zeros_like(inb)
    occ[inb] = grid.state[rr[inb], cc[inb]] == OCCUPIED
    blocked = occ | ~inb
    any_block = blocked.any(axis=1)
    first = np.argmax(blocked, axis=1)
    dist = np.where(any_block, ts[first] - step, max_range)
    return np.maximum(dist, 0.0)


def visible_free_cells(grid: GridMap, pose: Pose, fov: float,
                       max_range: float):
    """Free cells visible from the pose within the sensing cone.

    Returns (rows, cols, bearing offsets); visibility comes from the same
    grid ray sweep the mapping uses.
    """
    half = fov / 2.0
    n_rays = 181
    empty = (np.empty(0, dtype=np.int64),) * 2 + (np.empty(0),)
    sweep = _visible_depth_sweep(grid, pose, fov, max_range, n_rays)
    rad = max_range
    r0, c0 = grid.world_to_cell((pose.x - rad, pose.y - rad))
    r1, c1 = grid.world_to_cell((pose.x + rad, pose.y + rad))
    r0, c0 = max(r0, 0), max(c0, 0)
    r1, c1 = min(r1 + 1, grid.height), min(c1 + 1, grid.width)
    if r0 >= r1 or c0 >= c1:
        return empty
    sub = grid.state[r0:r1, c0:c1]
    rows, cols = np.nonzero(sub == FREE)
    if len(rows) == 0:
        return empty
    rows = rows + r0
    cols = cols + c0
    cx = grid.origin[0] + (cols + 0.5) * grid.resolution
    cy = grid.origin[1] + (rows + 0.5) * grid.resolution
    ddx = cx - pose.x
    ddy = cy - pose.y
    dist = np.hypot(ddx, ddy)
    bearing = np.arctan2(ddy, ddx) - pose.yaw
    bearing = (bearing + math.pi) % (2 * math.pi) - math.pi
    in_fov = (np.abs(bearing) <= half) & (dist <= max_range)
    if not in_fov.any():
        return empty
    rows, cols = rows[in_fov], cols[in_fov]
    dist, bearing = dist[in_fov], bearing[in_fov]
    ray_idx = np.clip(np.round((bearing + half) / fov * (n_rays - 1)),
                      0, n_rays - 1).astype(np.int64)
    visible = dist <= sweep[ray_idx] + grid.resolution * 0.5
    return rows[visible], cols[visible], bearing[visible]


def project_frame(sem: SemanticScoreMap, grid: GridMap, frame: FramedScore,
                  max_range: float = SENSE_RANGE) -> SemanticScoreMap:
    """Fuse a frame's score into every visible free cell within the FoV."""
    pose = frame.pose
    half = frame.fov / 2.0
    rows, cols, bearing = visible_free_cells(grid, pose, frame.fov, max_range)
    if len(rows) == 0:
        return sem
    c_cur = np.cos((bearing / half) * (math.pi / 2.0)) ** 2
    s_pre = sem.score[rows, cols]
    c_pre = sem.conf[rows, cols]
    total = c_cur + c_pre
    upd = total > 0
    rows, cols = rows[upd], cols[upd]
    c_cur, s_pre, c_pre, total = c_cur[upd], s_pre[upd], c_pre[upd], total[upd]
    sem.score[rows, cols] = (c_cur * frame.score + c_pre * s_pre) / total
    sem.conf[rows, cols] = (c_cur ** 2 + c_pre ** 2) / total
    return sem


def frontier_score(sem: SemanticScoreMap, cluster: FrontierCluster,
                   radius: float = FRONTIER_SCORE_RADIUS) -> float:
    """Confidence-weighted mean score over cells near the cluster center."""
    cx, cy = cluster.center
    n = int(math.ceil(radius / sem.resolution))
    c0 = int(math.floor((cx - sem.origin[0]) / sem.resolution))
    r0 = int(math.floor((cy - sem.origin[1]) / sem.resolution))
    h, w = sem.score.shape
    rlo, rhi = max(0, r0 - n), min(h, r0 + n + 1)
    clo, chi = max(0, c0 - n), min(w, c0 + n + 1)
    if rlo >= rhi or clo >= chi:
        return 0.0
    rr, cc = np.mgrid[rlo:rhi, clo:chi]
    px = sem.origin[0] + (cc + 0.5) * sem.resolution
    py = sem.origin[1] + (rr + 0.5) * sem.resolution
    mask = (px - cx) ** 2 + (py - cy) ** 2 <= radius ** 2
    conf = sem.conf[rlo:rhi, clo:chi][mask]
    score = sem.score[rlo:rhi, clo:chi][mask]
    total = conf.sum()
    if total <= 0.0:
        return 0.0
    return float((conf * score).sum() / total)
