"""Probabilistic occupancy grid, raycasting, and the Euclidean distance field.

The grid keeps per-cell occupancy log-odds updated from planar range scans
and derives a tri-state (free / occupied / unknown) view. Once a cell has
crossed a definitive threshold it never falls back to unknown: in the
log-odds dead band it keeps its last definitive state.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Pose

FREE = np.uint8(0)
OCCUPIED = np.uint8(1)
UNKNOWN = np.uint8(2)

# Sentinel distance reported where a region holds no obstacle at all.
D_CAP = 10.0


class GridBoundsError(ValueError):
    """A query point or scan origin falls outside the grid."""


@dataclass
class Scan:
    """One planar range scan: beam offsets relative to the pose yaw."""

    origin: Pose
    angles: np.ndarray          # beam angle offsets, strictly increasing
    ranges: np.ndarray          # measured range per beam, in [0, max_range]
    hits: np.ndarray            # bool, True when the beam ended on a surface
    max_range: float = 5.0

    def world_angles(self) -> np.ndarray:
        return self.origin.yaw + self.angles

    def hit_points(self) -> np.ndarray:
        """World coordinates of the beam endpoints that hit a surface."""
        ang = self.world_angles()[self.hits]
        r = self.ranges[self.hits]
        o = self.origin.xy
        return np.column_stack([o[0] + r * np.cos(ang), o[1] + r * np.sin(ang)])


class GridMap:
    """Log-odds occupancy grid over a fixed world rectangle.

    Cells are addressed (row, col) with row along +y and col along +x.
    """

    def __init__(self, width_m: float = 40.0, height_m: float = 40.0,
                 resolution: float = 0.05, origin=(-20.0, -20.0),
                 l_hit: float = 0.85, l_miss: float = -0.7,
                 l_min: float = -4.0, l_max: float = 4.0,
                 occ_threshold: float = 0.6, free_threshold: float = -0.6):
        self.resolution = float(resolution)
        self.origin = np.asarray(origin, dtype=float)
        self.width = int(round(width_m / resolution))
        self.height = int(round(height_m / resolution))
        self.l_hit = l_hit
        self.l_miss = l_miss
        self.l_min = l_min
        self.l_max = l_max
        self.occ_threshold = occ_threshold
        self.free_threshold = free_threshold
        self.log_odds = np.zeros((self.height, self.width), dtype=np.float64)
        self.state = np.full((self.height, self.width), UNKNOWN, dtype=np.uint8)
        self.last_changed: tuple | None = None

    # -- indexing ---------------------------------------------------------

    def world_to_cell(self, p) -> tuple[int, int]:
        c = int(math.floor((p[0] - self.origin[0]) / self.resolution))
        r = int(math.floor((p[1] - self.origin[1]) / self.resolution))
        return r, c

    def cells_of(self, pts: np.ndarray) -> np.ndarray:
        """Vectorized world->cell for an (N, 2) array; result (N, 2) as (row, col)."""
        rc = np.empty((len(pts), 2), dtype=np.int64)
        rc[:, 1] = np.floor((pts[:, 0] - self.origin[0]) / self.resolution).astype(np.int64)
        rc[:, 0] = np.floor((pts[:, 1] - self.origin[1]) / self.resolution).astype(np.int64)
        return rc

    def cell_center(self, r: int, c: int) -> np.ndarray:
        return np.array([
            self.origin[0] + (c + 0.5) * self.resolution,
            self.origin[1] + (r + 0.5) * self.resolution,
        ])

    def cell_centers(self, rc: np.ndarray) -> np.ndarray:
        out = np.empty((len(rc), 2), dtype=float)
        out[:, 0] = self.origin[0] + (rc[:, 1] + 0.5) * self.resolution
        out[:, 1] = self.origin[1] + (rc[:, 0] + 0.5) * self.resolution
        return out

    def in_bounds(self, r: int, c: int) -> bool:
        return 0 <= r < self.height and 0 <= c < self.width

    def point_in_bounds(self, p) -> bool:
        r, c = self.world_to_cell(p)
        return self.in_bounds(r, c)

    # -- updates ----------------------------------------------------------

    def _apply_state(self, rows: np.ndarray, cols: np.ndarray) -> None:
        lo = self.log_odds[rows, cols]
        st = self.state[rows, cols]
        st = np.where(lo > self.occ_threshold, OCCUPIED, st)
        st = np.where(lo < self.free_threshold, FREE, st)
        self.state[rows, cols] = st

    def set_occupied(self, rc: np.ndarray) -> None:
        """Force cells occupied (scene rasterization, tests)."""
        rc = np.asarray(rc, dtype=np.int64).reshape(-1, 2)
        self.log_odds[rc[:, 0], rc[:, 1]] = self.l_max
        self.state[rc[:, 0], rc[:, 1]] = OCCUPIED

    def set_free(self, rc: np.ndarray) -> None:
        rc = np.asarray(rc, dtype=np.int64).reshape(-1, 2)
        self.log_odds[rc[:, 0], rc[:, 1]] = self.l_min
        self.state[rc[:, 0], rc[:, 1]] = FREE


def _march_cells(grid: GridMap, origin: np.ndarray, angles: np.ndarray,
                 ranges: np.ndarray, step: float) -> np.ndarray:
    """Cells traversed by the given beams, as a deduplicated (N, 2) array.

    Marches sample points along each beam at `step` spacing (endpoint
    excluded) and collects the cells they land in.
    """
    if len(angles) == 0:
        return np.empty((0, 2), dtype=np.int64)
    rmax = float(np.max(ranges))
    if rmax <= step:
        return np.empty((0, 2), dtype=np.int64)
    ts = np.arange(0.0, rmax, step)
    live = ts[None, :] < ranges[:, None]            # (beams, samples)
    px = origin[0] + np.cos(angles)[:, None] * ts[None, :]
    py = origin[1] + np.sin(angles)[:, None] * ts[None, :]
    cc = np.floor((px[live] - grid.origin[0]) / grid.resolution).astype(np.int64)
    rr = np.floor((py[live] - grid.origin[1]) / grid.resolution).astype(np.int64)
    ok = (rr >= 0) & (rr < grid.height) & (cc >= 0) & (cc < grid.width)
    if not ok.any():
        return np.empty((0, 2), dtype=np.int64)
    flat = np.unique(rr[ok] * grid.width + cc[ok])
    return np.column_stack([flat // grid.width, flat % grid.width])


def integrate_scan(grid: GridMap, scan: Scan) -> GridMap:
    """Fuse one scan into the grid: traversed cells get free evidence, hit
    endpoints get occupied evidence. Each cell is updated at most once per
    scan so repeated integration converges at the log-odds clamps.
    """
    o = scan.origin.xy
    if not grid.point_in_bounds(o):
        raise GridBoundsError(f"scan origin {o} outside grid")
    angles = scan.world_angles()
    step = grid.resolution / 3.0
    free_rc = _march_cells(grid, o, angles, scan.ranges, step)

    hit_ang = angles[scan.hits]
    hit_r = scan.ranges[scan.hits]
    hit_pts = np.column_stack([o[0] + hit_r * np.cos(hit_ang),
                               o[1] + hit_r * np.sin(hit_ang)])
    hit_rc = grid.cells_of(hit_pts) if len(hit_pts) else np.empty((0, 2), dtype=np.int64)
    if len(hit_rc):
        ok = (hit_rc[:, 0] >= 0) & (hit_rc[:, 0] < grid.height) & \
             (hit_rc[:, 1] >= 0) & (hit_rc[:, 1] < grid.width)
        hit_rc = hit_rc[ok]
        flat = np.unique(hit_rc[:, 0] * grid.width + hit_rc[:, 1])
        hit_rc = np.column_stack([flat // grid.width, flat % grid.width])

    # hits win over traversal when a cell appears in both
    if len(free_rc) and len(hit_rc):
        fflat = free_rc[:, 0] * grid.width + free_rc[:, 1]
        hflat = hit_rc[:, 0] * grid.width + hit_rc[:, 1]
        keep = ~np.isin(fflat, hflat)
        free_rc = free_rc[keep]

    touched = []
    if len(free_rc):
        grid.log_odds[free_rc[:, 0], free_rc[:, 1]] = np.clip(
            grid.log_odds[free_rc[:, 0], free_rc[:, 1]] + grid.l_miss,
            grid.l_min, grid.l_max)
        grid._apply_state(free_rc[:, 0], free_rc[:, 1])
        touched.append(free_rc)
    if len(hit_rc):
        grid.log_odds[hit_rc[:, 0], hit_rc[:, 1]] = np.clip(
            grid.log_odds[hit_rc[:, 0], hit_rc[:, 1]] + grid.l_hit,
            grid.l_min, grid.l_max)
        grid._apply_state(hit_rc[:, 0], hit_rc[:, 1])
        touched.append(hit_rc)

    if touched:
        allrc = np.vstack(touched)
        grid.last_changed = (int(allrc[:, 0].min()), int(allrc[:, 1].min()),
                             int(allrc[:, 0].max()) + 1, int(allrc[:, 1].max()) + 1)
    else:
        grid.last_changed = None
    return grid


def raycast(grid: GridMap, frm, to):
    """First occupied cell on the discrete ray from `frm` to `to`, else None.

    The ray is discretized by uniform sampling at resolution/10; the sample
    set is symmetric under endpoint swap, so a fixed (from, to) pair always
    traverses the same cells. Both endpoints must lie inside the grid.
    """
    if not grid.point_in_bounds(frm) or not grid.point_in_bounds(to):
        raise GridBoundsError("raycast endpoint outside grid")
    frm = np.asarray(frm, dtype=float)
    to = np.asarray(to, dtype=float)
    d = float(np.linalg.norm(to - frm))
    step = grid.resolution / 10.0
    n = int(d / step) + 1
    ts = np.minimum(1.0, np.arange(n + 1) / n)
    pts = frm[None, :] + (to - frm)[None, :] * ts[:, None]
    rc = grid.cells_of(pts)
    occ = grid.state[rc[:, 0], rc[:, 1]] == OCCUPIED
    idx = int(np.argmax(occ))
    if occ[idx]:
        return (int(rc[idx, 0]), int(rc[idx, 1]))
    return None


def ray_first_nonfree(grid: GridMap, frm, to):
    """First cell along the sampled ray that is not known-free, or None.

    Unlike raycast(), unknown cells block too: a sightline is only
    confirmed when every traversed cell has actually been observed free.
    """
    if not grid.point_in_bounds(frm) or not grid.point_in_bounds(to):
        raise GridBoundsError("ray endpoint outside grid")
    frm = np.asarray(frm, dtype=float)
    to = np.asarray(to, dtype=float)
    d = float(np.linalg.norm(to - frm))
    step = grid.resolution / 10.0
    n = int(d / step) + 1
    ts = np.minimum(1.0, np.arange(n + 1) / n)
    pts = frm[None, :] + (to - frm)[None, :] * ts[:, None]
    rc = grid.cells_of(pts)
    nonfree = grid.state[rc[:, 0], rc[:, 1]] != FREE
    idx = int(np.argmax(nonfree))
    if nonfree[idx]:
        return (int(rc[idx, 0]), int(rc[idx, 1]))
    return None


@dataclass
class EsdfMap:
    """Euclidean distance to the nearest occupied cell, over a grid region."""

    resolution: float
    origin: np.ndarray          # world origin of the parent grid
    row0: int                   # region offset within the parent grid
    col0: int
    distance: np.ndarray        # meters, shape (region_h, region_w)
    d_cap: float = D_CAP

    def distance_at(self, p) -> float:
        """Distance lookup in meters; d_cap outside the computed region."""
        c = int(math.floor((p[0] - self.origin[0]) / self.resolution)) - self.col0
        r = int(math.floor((p[1] - self.origin[1]) / self.resolution)) - self.row0
        if 0 <= r < self.distance.shape[0] and 0 <= c < self.distance.shape[1]:
            return float(self.distance[r, c])
        return self.d_cap


def compute_esdf(grid: GridMap, region=None, d_cap: float = D_CAP) -> EsdfMap:
    """Exact Euclidean distance transform over `region` (row0, col0, row1, col1).

    Distances are measured between cell centers, to occupied cells within
    the region; a region with no obstacle reports d_cap everywhere.
    Two separable passes in integer squared arithmetic keep the result exact.
    """
    if region is None:
        region = (0, 0, grid.height, grid.width)
    r0, c0, r1, c1 = region
    if not (0 <= r0 <= r1 <= grid.height and 0 <= c0 <= c1 <= grid.width):
        raise GridBoundsError(f"esdf region {region} outside grid")
    occ = grid.state[r0:r1, c0:c1] == OCCUPIED
    h, w = occ.shape
    if h == 0 or w == 0 or not occ.any():
        return EsdfMap(grid.resolution, grid.origin, r0, c0,
                       np.full((h, w), d_cap), d_cap)

    big = h + w + 1
    # pass 1: per column, distance in rows to the nearest occupied cell
    g = np.full((h, w), big, dtype=np.int64)
    g[occ] = 0
    for i in range(1, h):
        np.minimum(g[i], g[i - 1] + 1, out=g[i])
    for i in range(h - 2, -1, -1):
        np.minimum(g[i], g[i + 1] + 1, out=g[i])

    # pass 2: per row, minimize g[k]^2 + (j-k)^2 over columns k
    cols = np.arange(w, dtype=np.int64)
    off2 = (cols[:, None] - cols[None, :]) ** 2     # (j, k)
    d2 = np.empty((h, w), dtype=np.int64)
    g2 = g.astype(np.int64) ** 2
    for i in range(h):
        d2[i] = (g2[i][None, :] + off2).min(axis=1)

    dist = np.sqrt(d2.astype(np.float64)) * grid.resolution
    np.minimum(dist, d_cap, out=dist)
    return EsdfMap(grid.resolution, grid.origin, r0, c0, dist, d_cap)


def inflate_occupancy(grid: GridMap, radius: float) -> np.ndarray:
    """Boolean mask of cells within `radius` meters of an occupied cell."""
    from scipy import ndimage

    occ = grid.state == OCCUPIED
    if radius <= 0:
        return occ
    n = int(math.floor(radius / grid.resolution))
    if n == 0:
        return occ
    yy, xx = np.mgrid[-n:n + 1, -n:n + 1]
    disc = (yy ** 2 + xx ** 2) * grid.resolution ** 2 <= radius ** 2 + 1e-12
    return ndimage.binary_dilation(occ, structure=disc)
