"""Episode scoring: SR / SPL / SoftSPL / DTG and the failure taxonomy."""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .grid import FREE, OCCUPIED, GridMap
from .scene import Scene

SQRT2 = math.sqrt(2.0)

CATEGORIES = ("A", "B", "C", "D", "E", "F")
NEAR_TARGET_RADIUS = 1.0     # "passed the target" distance for category F


@dataclass
class EpisodeResult:
    episode: int
    family: str
    scene_seed: int
    target: str
    outcome: str                 # A..F
    success: bool
    steps: int
    path_length: float           # p, meters walked
    shortest_path: float         # l, geodesic start -> goal
    d_init: float
    d_final: float               # d_T
    collisions: int
    stop_kind: str | None        # target / exhausted / None
    near_target: bool
    spl: float = 0.0
    softspl: float = 0.0

    def to_json(self) -> dict:
        return {
            "episode": self.episode,
            "family": self.family,
            "scene_seed": self.scene_seed,
            "target": self.target,
            "outcome": self.outcome,
            "success": int(self.success),
            "steps": self.steps,
            "path_length": round(self.path_length, 6),
            "shortest_path": round(self.shortest_path, 6),
            "d_init": round(self.d_init, 6),
            "d_final": round(self.d_final, 6),
            "collisions": self.collisions,
            "stop_kind": self.stop_kind,
            "near_target": int(self.near_target),
            "spl": round(self.spl, 6),
            "softspl": round(self.softspl, 6),
        }


@dataclass
class AggregateMetrics:
    episodes: int = 0
    sr: float = 0.0              # percent
    spl: float = 0.0
    softspl: float = 0.0
    dtg: float = 0.0             # meters
    mean_collisions: float = 0.0
    mean_steps: float = 0.0
    failures: dict = field(default_factory=lambda: {c: 0 for c in CATEGORIES})

    def to_json(self) -> dict:
        out = {
            "episodes": self.episodes,
            "sr": round(self.sr, 4),
            "spl": round(self.spl, 6),
            "softspl": round(self.softspl, 6),
            "dtg": round(self.dtg, 6),
            "mean_collisions": round(self.mean_collisions, 4),
            "mean_steps": round(self.mean_steps, 2),
        }
        for c in CATEGORIES:
            out[f"count_{c}"] = self.failures[c]
        return out


def episode_spl(success: bool, p: float, l: float) -> float:
    """Success weighted by inverse path length; 0 for failures."""
    if not success:
        return 0.0
    if l <= 1e-9:
        return 1.0
    return l / max(p, l)


def episode_softspl(d_final: float, d_init: float, p: float, l: float) -> float:
    """Progress-credited variant: (1 - min(1, d_T / d_init)) * l / max(p, l)."""
    if l <= 1e-9 or not math.isfinite(l):
        return 0.0
    ratio = l / max(p, l)
    if d_init <= 1e-9 or not math.isfinite(d_init):
        progress = 1.0 if d_final <= 1e-9 else 0.0
    else:
        progress = 1.0 - min(1.0, d_final / d_init)
    return progress * ratio


def score_episode(result: EpisodeResult) -> EpisodeResult:
    result.spl = episode_spl(result.success, result.path_length,
                             result.shortest_path)
    result.softspl = episode_softspl(result.d_final, result.d_init,
                                     result.path_length, result.shortest_path)
    return result


def classify_failure(success: bool, all_targets_off_floor: bool,
                     stop_kind: str | None, near_target: bool,
                     stepout: bool) -> str:
    """A..F with precedence A > B > C > F > D > E.

    C requires the agent to have stopped at something it believed was the
    target; exhausted stops and stepouts fall through to D / E unless the
    agent passed within NEAR_TARGET_RADIUS of a true target (F).
    """
    if success:
        return "A"
    if all_targets_off_floor:
        return "B"
    if stop_kind == "target":
        return "C"
    if near_target:
        return "F"
    if stop_kind == "exhausted":
        return "D"
    if stepout:
        return "E"
    return "D"


def compute_metrics(results: list[EpisodeResult]) -> AggregateMetrics:
    agg = AggregateMetrics()
    agg.episodes = len(results)
    if not results:
        return agg
    agg.sr = 100.0 * sum(r.success for r in results) / len(results)
    agg.spl = sum(r.spl for r in results) / len(results)
    agg.softspl = sum(r.softspl for r in results) / len(results)
    finite_d = [r.d_final for r in results if math.isfinite(r.d_final)]
    agg.dtg = sum(finite_d) / len(finite_d) if finite_d else 0.0
    agg.mean_collisions = sum(r.collisions for r in results) / len(results)
    agg.mean_steps = sum(r.steps for r in results) / len(results)
    for r in results:
        agg.failures[r.outcome] += 1
    return agg


# ------------------------------------------------------- geodesic fields

_NEIGH = [(-1, 0, 1.0), (1, 0, 1.0), (0, -1, 1.0), (0, 1, 1.0),
          (-1, -1, SQRT2), (-1, 1, SQRT2), (1, -1, SQRT2), (1, 1, SQRT2)]


def goal_cells(true_grid: GridMap, scene: Scene,
               reach: float = 0.25) -> np.ndarray:
    """Free cells within `reach` of an annotated target footprint."""
    cells = []
    for obj in scene.target_instances():
        v = obj.polygon.vertices
        lo = true_grid.world_to_cell(v.min(axis=0) - reach - 0.1)
        hi = true_grid.world_to_cell(v.max(axis=0) + reach + 0.1)
        for r in range(max(0, lo[0]), min(true_grid.height, hi[0] + 1)):
            for c in range(max(0, lo[1]), min(true_grid.width, hi[1] + 1)):
                if true_grid.state[r, c] != FREE:
                    continue
                p = true_grid.cell_center(r, c)
                if obj.polygon.distance(p) <= reach:
                    cells.append((r, c))
    if not cells:
        return np.empty((0, 2), dtype=np.int64)
    return np.unique(np.array(cells, dtype=np.int64), axis=0)


def goal_distance_field(true_grid: GridMap, scene: Scene) -> np.ndarray:
    """Geodesic distance (meters) from every free cell to the goal set."""
    h, w = true_grid.height, true_grid.width
    dist = np.full((h, w), np.inf)
    blocked = true_grid.state == OCCUPIED
    heap = []
    for r, c in goal_cells(true_grid, scene):
        dist[r, c] = 0.0
        heap.append((0.0, int(r) * w + int(c)))
    heapq.heapify(heap)
    closed = np.zeros((h, w), dtype=bool)
    res = true_grid.resolution
    while heap:
        d0, flat = heapq.heappop(heap)
        r, c = divmod(flat, w)
        if closed[r, c]:
            continue
        closed[r, c] = True
        for dr, dc, step in _NEIGH:
            nr, nc = r + dr, c + dc
            if nr < 0 or nr >= h or nc < 0 or nc >= w:
                continue
            if blocked[nr, nc] or closed[nr, nc]:
                continue
            nd = d0 + step * res
            if nd < dist[nr, nc]:
                dist[nr, nc] = nd
                heapq.heappush(heap, (nd, nr * w + nc))
    return dist


def geodesic_at(field: np.ndarray, true_grid: GridMap, p) -> float:
    rc = true_grid.world_to_cell(p)
    if true_grid.in_bounds(*rc) and math.isfinite(field[rc]):
        return float(field[rc])
    return math.inf
