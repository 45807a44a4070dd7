"""Shortest-path planning and discrete action selection.

A* runs 8-connected on the occupancy grid with obstacles inflated by the
safety radius; unknown cells stay traversable at a cost multiplier so paths
can reach frontiers. Actions are picked by the combined efficiency/safety
cost over the candidate set.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .geometry import Pose, wrap_angle
from .grid import FREE, OCCUPIED, UNKNOWN, EsdfMap, GridMap, inflate_occupancy

SQRT2 = math.sqrt(2.0)
FORWARD_STEP = 0.25
TURN_ANGLE = math.radians(30.0)


class Action(Enum):
    MOVE_FORWARD = "move_forward"
    TURN_LEFT = "turn_left"
    TURN_RIGHT = "turn_right"
    LOOK_UP = "look_up"
    LOOK_DOWN = "look_down"
    STOP = "stop"


# tie-break preference when total costs come out equal
ACTION_ORDER = [Action.MOVE_FORWARD, Action.TURN_LEFT, Action.TURN_RIGHT,
                Action.LOOK_DOWN, Action.LOOK_UP]


class NoRouteError(RuntimeError):
    """No traversable path exists between the requested endpoints."""


@dataclass
class NavParams:
    d_local: float = 0.75
    w_target: float = 200.0
    w_prox: float = 2000.0
    w_safe: float = 1.0
    eps: float = 1e-2
    k_samples: int = 10
    d_th: float = 0.15
    inflation: float = 0.18
    unknown_mult: float = 1.5
    goal_snap: float = 0.5
    success_dist: float = 0.2


@dataclass
class PathPlan:
    points: np.ndarray        # (N, 2) world waypoints, start first
    length: float             # meters, exact from step composition
    straight_steps: int = 0
    diagonal_steps: int = 0


@dataclass
class CostBreakdown:
    target: float
    prox: float
    safe: float

    @property
    def total(self) -> float:
        return self.target + self.prox + self.safe


class PlanningGrid:
    """Occupancy grid view with inflation and traversal cost classes.

    Traversable cells are non-occupied, non-inflated cells; unknown cells
    cost `unknown_mult` per meter. Cells near the goal can be relaxed to a
    2x multiplier when their true clearance still fits the agent, so goals
    flush against obstacles stay reachable. `refresh` recomputes only the
    window around a map change, so a per-step rebuild stays cheap.
    """

    def __init__(self, grid: GridMap, params: NavParams):
        self.grid = grid
        self.params = params
        self.inflated = inflate_occupancy(grid, params.inflation)
        self.occupied = grid.state == OCCUPIED
        self.near_occ = inflate_occupancy(grid, 2 * grid.resolution)
        self.unknown = grid.state == UNKNOWN
        self.mult = np.where(self.unknown, params.unknown_mult, 1.0)
        self.blocked = self.inflated.copy()

    def refresh(self, changed) -> None:
        if changed is None:
            return
        g = self.grid
        pad = int(math.ceil(self.params.inflation / g.resolution)) + 1
        r0 = max(0, changed[0] - pad)
        c0 = max(0, changed[1] - pad)
        r1 = min(g.height, changed[2] + pad)
        c1 = min(g.width, changed[3] + pad)
        sub = GridMap.__new__(GridMap)
        sub.resolution = g.resolution
        sub.state = g.state[max(0, r0 - pad):min(g.height, r1 + pad),
                            max(0, c0 - pad):min(g.width, c1 + pad)]
        inf_sub = inflate_occupancy(sub, self.params.inflation)
        near_sub = inflate_occupancy(sub, 2 * g.resolution)
        ir0 = r0 - max(0, r0 - pad)
        ic0 = c0 - max(0, c0 - pad)
        self.inflated[r0:r1, c0:c1] = inf_sub[ir0:ir0 + (r1 - r0),
                                              ic0:ic0 + (c1 - c0)]
        self.near_occ[r0:r1, c0:c1] = near_sub[ir0:ir0 + (r1 - r0),
                                               ic0:ic0 + (c1 - c0)]
        window = g.state[r0:r1, c0:c1]
        self.occupied[r0:r1, c0:c1] = window == OCCUPIED
        unk = window == UNKNOWN
        self.unknown[r0:r1, c0:c1] = unk
        self.mult[r0:r1, c0:c1] = np.where(unk, self.params.unknown_mult, 1.0)
        self.blocked[r0:r1, c0:c1] = self.inflated[r0:r1, c0:c1]

    def relax_region(self, goal_rc, radius: float = 0.45) -> np.ndarray:
        """Blocked mask with a relaxation bubble around the goal cell."""
        blocked = self.blocked.copy()
        mult = self.mult.copy()
        n = int(radius / self.grid.resolution)
        r0 = max(0, goal_rc[0] - n)
        r1 = min(self.grid.height, goal_rc[0] + n + 1)
        c0 = max(0, goal_rc[1] - n)
        c1 = min(self.grid.width, goal_rc[1] + n + 1)
        zone = np.zeros_like(blocked)
        zone[r0:r1, c0:c1] = True
        relax = zone & self.inflated & ~self.near_occ
        blocked[relax] = False
        mult[relax] = 2.0
        return blocked, mult


def _snap_cell(pg: PlanningGrid, blocked: np.ndarray, rc, max_radius: float,
               prefer_xy=None):
    """Nearest traversable cell within max_radius, by squared cell distance.

    Equidistant candidates resolve toward `prefer_xy` (the approach side),
    which keeps the snapped goal stable while the agent closes in.
    """
    g = pg.grid
    n = int(math.ceil(max_radius / g.resolution))
    best = None
    best_key = None
    r0, c0 = rc
    lim2 = (max_radius / g.resolution) ** 2 + 1e-9
    for dr in range(-n, n + 1):
        for dc in range(-n, n + 1):
            d2 = dr * dr + dc * dc
            if d2 > lim2:
                continue
            r, c = r0 + dr, c0 + dc
            if not g.in_bounds(r, c):
                continue
            if blocked[r, c]:
                continue
            if prefer_xy is not None:
                p = g.cell_center(r, c)
                tie = (p[0] - prefer_xy[0]) ** 2 + (p[1] - prefer_xy[1]) ** 2
            else:
                tie = 0.0
            key = (d2, tie, r, c)
            if best_key is None or key < best_key:
                best, best_key = (r, c), key
    return best


_NEIGH = [(-1, 0, 1.0), (1, 0, 1.0), (0, -1, 1.0), (0, 1, 1.0),
          (-1, -1, SQRT2), (-1, 1, SQRT2), (1, -1, SQRT2), (1, 1, SQRT2)]


def astar(pg: PlanningGrid, start_xy, goal_xy, relax_goal: bool = True) -> PathPlan:
    """8-connected A* from start to goal (snapped to traversable cells).

    Step costs are {1, sqrt2} * resolution scaled by the destination cell's
    traversal multiplier; the returned length is the geometric path length.
    Raises NoRouteError when the goal cannot be reached.
    """
    g = pg.grid
    params = pg.params
    start_rc = g.world_to_cell(start_xy)
    goal_rc = g.world_to_cell(goal_xy)
    if not g.in_bounds(*start_rc) or not g.in_bounds(*goal_rc):
        raise NoRouteError("endpoint outside grid")

    if relax_goal:
        blocked, mult = pg.relax_region(goal_rc)
    else:
        blocked, mult = pg.blocked, pg.mult

    if blocked[goal_rc]:
        snapped = _snap_cell(pg, blocked, goal_rc, params.goal_snap,
                             prefer_xy=start_xy)
        if snapped is None:
            raise NoRouteError(f"no traversable cell near goal {goal_xy}")
        goal_rc = snapped

    # the agent may legitimately stand inside the inflation band; let it out
    if blocked[start_rc]:
        blocked = blocked.copy()
        esc = int(math.ceil(params.inflation / g.resolution))
        for dr in range(-esc, esc + 1):
            for dc in range(-esc, esc + 1):
                r, c = start_rc[0] + dr, start_rc[1] + dc
                if g.in_bounds(r, c) and not pg.occupied[r, c]:
                    blocked[r, c] = False

    if start_rc == goal_rc:
        return PathPlan(np.array([g.cell_center(*start_rc)]), 0.0)

    h, w = g.height, g.width
    res = g.resolution
    gscore = np.full((h, w), np.inf)
    gscore[start_rc] = 0.0
    came = np.full((h, w), -1, dtype=np.int64)
    closed = np.zeros((h, w), dtype=bool)
    gr, gc = goal_rc
    diag_k = (SQRT2 - 1.0) * res

    dr0 = abs(start_rc[0] - gr)
    dc0 = abs(start_rc[1] - gc)
    open_heap = [(max(dr0, dc0) * res + diag_k * min(dr0, dc0),
                  start_rc[0] * w + start_rc[1])]
    push = heapq.heappush
    pop = heapq.heappop
    while open_heap:
        f, flat = pop(open_heap)
        r, c = divmod(flat, w)
        if closed[r, c]:
            continue
        closed[r, c] = True
        if r == gr and c == gc:
            break
        g0 = gscore[r, c]
        for dr, dc, step in _NEIGH:
            nr, nc = r + dr, c + dc
            if nr < 0 or nr >= h or nc < 0 or nc >= w:
                continue
            if blocked[nr, nc] or closed[nr, nc]:
                continue
            ng = g0 + step * res * mult[nr, nc]
            if ng < gscore[nr, nc]:
                gscore[nr, nc] = ng
                came[nr, nc] = flat
                adr = nr - gr if nr > gr else gr - nr
                adc = nc - gc if nc > gc else gc - nc
                hh = (adr if adr > adc else adc) * res + \
                    diag_k * (adc if adr > adc else adr)
                push(open_heap, (ng + hh, nr * w + nc))
    if not closed[goal_rc]:
        raise NoRouteError(f"no route from {start_xy} to {goal_xy}")

    cells = [goal_rc]
    cur = goal_rc[0] * w + goal_rc[1]
    while came[divmod(cur, w)] >= 0:
        cur = came[divmod(cur, w)]
        cells.append(divmod(cur, w))
    cells.reverse()
    pts = np.array([g.cell_center(r, c) for r, c in cells])
    straight = diag = 0
    for (r0, c0), (r1, c1) in zip(cells[:-1], cells[1:]):
        if r0 != r1 and c0 != c1:
            diag += 1
        else:
            straight += 1
    length = (straight + SQRT2 * diag) * res
    return PathPlan(pts, length, straight, diag)


def dijkstra_field(pg: PlanningGrid, start_xy, targets_rc=None,
                   stop_at_first: bool = False):
    """Cost field (meters, same step rule as astar) from start to all cells.

    When targets_rc is given the search stops once all of them are settled
    (or the first one, with stop_at_first). Returns (cost array, settled
    mask); Dijkstra settles in cost order, so the first settled target is
    the argmin over shortest-path distances.
    """
    g = pg.grid
    params = pg.params
    start_rc = g.world_to_cell(start_xy)
    if not g.in_bounds(*start_rc):
        raise NoRouteError("start outside grid")
    blocked = pg.blocked
    if blocked[start_rc]:
        blocked = blocked.copy()
        esc = int(math.ceil(params.inflation / g.resolution))
        for dr in range(-esc, esc + 1):
            for dc in range(-esc, esc + 1):
                r, c = start_rc[0] + dr, start_rc[1] + dc
                if g.in_bounds(r, c) and not pg.occupied[r, c]:
                    blocked[r, c] = False
    mult = pg.mult
    h, w = g.height, g.width
    res = g.resolution
    dist = np.full((h, w), np.inf)
    dist[start_rc] = 0.0
    closed = np.zeros((h, w), dtype=bool)
    remaining = None
    if targets_rc is not None:
        remaining = {(int(r), int(c)) for r, c in targets_rc}
    heap = [(0.0, start_rc[0] * w + start_rc[1])]
    while heap:
        d0, flat = heapq.heappop(heap)
        r, c = divmod(flat, w)
        if closed[r, c]:
            continue
        closed[r, c] = True
        if remaining is not None and (r, c) in remaining:
            remaining.discard((r, c))
            if stop_at_first or not remaining:
                break
        for dr, dc, step in _NEIGH:
            nr, nc = r + dr, c + dc
            if nr < 0 or nr >= h or nc < 0 or nc >= w:
                continue
            if blocked[nr, nc] or closed[nr, nc]:
                continue
            nd = d0 + step * res * mult[nr, nc]
            if nd < dist[nr, nc]:
                dist[nr, nc] = nd
                heapq.heappush(heap, (nd, nr * w + nc))
    return dist, closed


def _csgraph_distances(pg: PlanningGrid, sources_rc,
                       coarse: int = 2) -> "_CoarseFields":
    """Shortest-path distance fields from each source cell.

    Built on scipy's compiled Dijkstra over a `coarse`-times downsampled
    8-connected graph; used for the many-pairs queries (tour matrices,
    utility scores), where centimeter accuracy is irrelevant.
    """
    from scipy.sparse import csr_matrix
    from scipy.sparse.csgraph import dijkstra as cs_dijkstra

    g = pg.grid
    k = coarse
    h = g.height // k
    w = g.width // k
    res = g.resolution * k
    hk, wk = h * k, w * k
    # any-blocked pooling; unknown multiplier pooled by max
    blk = pg.blocked[:hk, :wk].reshape(h, k, w, k).any(axis=(1, 3))
    mult = pg.mult[:hk, :wk].reshape(h, k, w, k).max(axis=(1, 3))
    esc = max(1, int(math.ceil(pg.params.inflation / res)))
    src_idx = []
    for r0, c0 in sources_rc:
        r0, c0 = min(r0 // k, h - 1), min(c0 // k, w - 1)
        src_idx.append(r0 * w + c0)
        if blk[r0, c0]:
            rlo, rhi = max(0, r0 - esc), min(h, r0 + esc + 1)
            clo, chi = max(0, c0 - esc), min(w, c0 + esc + 1)
            blk[rlo:rhi, clo:chi] = False
    rows, cols, data = [], [], []
    idx = np.arange(h * w).reshape(h, w)
    open_mask = ~blk
    for dr, dc, step in _NEIGH:
        src = idx[max(0, -dr):h - max(0, dr), max(0, -dc):w - max(0, dc)]
        dst = idx[max(0, dr):h + min(0, dr), max(0, dc):w + min(0, dc)]
        ok = open_mask.ravel()[src.ravel()] & open_mask.ravel()[dst.ravel()]
        s = src.ravel()[ok]
        d = dst.ravel()[ok]
        rows.append(s)
        cols.append(d)
        data.append(step * res * mult.ravel()[d])
    graph = csr_matrix((np.concatenate(data),
                        (np.concatenate(rows), np.concatenate(cols))),
                       shape=(h * w, h * w))
    out = cs_dijkstra(graph, directed=True, indices=src_idx)
    return _CoarseFields(out.reshape(len(src_idx), h, w), k, h, w)


class _CoarseFields:
    """Distance fields on the downsampled grid, indexed by fine cells."""

    def __init__(self, fields, k, h, w):
        self.fields = fields
        self.k = k
        self.h = h
        self.w = w

    def at(self, i, rc) -> float:
        r = min(int(rc[0]) // self.k, self.h - 1)
        c = min(int(rc[1]) // self.k, self.w - 1)
        return float(self.fields[i, r, c])


def local_target(path: PathPlan, d_local: float) -> np.ndarray:
    """First path point with cumulative arc length beyond d_local."""
    pts = path.points
    if len(pts) == 0:
        raise ValueError("empty path")
    acc = 0.0
    for i in range(1, len(pts)):
        acc += float(np.linalg.norm(pts[i] - pts[i - 1]))
        if acc > d_local:
            return pts[i]
    return pts[-1]


def simulate_action(pose: Pose, action: Action) -> Pose:
    if action == Action.MOVE_FORWARD:
        return pose.moved(FORWARD_STEP)
    if action == Action.TURN_LEFT:
        return pose.turned(TURN_ANGLE)
    if action == Action.TURN_RIGHT:
        return pose.turned(-TURN_ANGLE)
    if action == Action.LOOK_UP:
        return Pose(pose.x, pose.y, pose.yaw, pose.camera_pitch + TURN_ANGLE)
    if action == Action.LOOK_DOWN:
        return Pose(pose.x, pose.y, pose.yaw, pose.camera_pitch - TURN_ANGLE)
    return pose


def action_cost(pose: Pose, action: Action, p_local, esdf: EsdfMap,
                params: NavParams) -> CostBreakdown:
    """Efficiency + safety cost of one candidate action."""
    new = simulate_action(pose, action)
    p_cur = pose.xy
    p_new = new.xy
    d_new = float(np.linalg.norm(p_new - p_local))
    d_cur = float(np.linalg.norm(p_cur - p_local))
    c_target = params.w_target * d_new
    c_prox = params.w_prox * (d_new - d_cur) if d_new > d_cur else 0.0
    c_safe = 0.0
    for i in range(1, params.k_samples + 1):
        p = p_cur + (p_new - p_cur) * (i / params.k_samples)
        d_obs = esdf.distance_at(p)
        if d_obs < params.d_th:
            c_safe += params.w_safe / (d_obs + params.eps)
    return CostBreakdown(c_target, c_prox, c_safe)


def select_action(pose: Pose, p_local, esdf: EsdfMap, params: NavParams,
                  stop_point=None, forbid_forward: bool = False,
                  stop_dist: float | None = None, prefer_turn: Action | None = None):
    """Pick the lowest-cost non-STOP action toward the local target.

    Issues STOP when `stop_point` (the reliable target's nearest point) is
    within the success distance (or a caller-tightened stop_dist). The cost
    terms cannot tell the two turns apart (both stationary), so the tied
    pair is ordered by the ongoing turn direction when there is one, else
    by post-turn alignment with the local target; committing to a turn
    direction prevents left-right flapping at blocked headings.
    Returns (action, {action: CostBreakdown}).
    """
    if stop_point is not None:
        thresh = params.success_dist if stop_dist is None else stop_dist
        if float(np.linalg.norm(pose.xy - np.asarray(stop_point))) <= thresh:
            return Action.STOP, {}
    if prefer_turn in (Action.TURN_LEFT, Action.TURN_RIGHT):
        first = prefer_turn
    else:
        d = np.asarray(p_local) - pose.xy
        err = wrap_angle(math.atan2(d[1], d[0]) - pose.yaw) \
            if np.linalg.norm(d) > 1e-9 else 0.0
        first = Action.TURN_LEFT if err >= 0 else Action.TURN_RIGHT
    second = Action.TURN_RIGHT if first == Action.TURN_LEFT else Action.TURN_LEFT
    order = [Action.MOVE_FORWARD, first, second, Action.LOOK_DOWN, Action.LOOK_UP]
    costs = {}
    best = None
    for action in order:
        if forbid_forward and action == Action.MOVE_FORWARD:
            continue
        cb = action_cost(pose, action, p_local, esdf, params)
        costs[action] = cb
        if best is None or cb.total < costs[best].total:
            best = action
    return best, costs


def follow_path_action(pose: Pose, p_local, forbid_forward: bool = False,
                       prefer_turn: Action | None = None) -> Action:
    """Shortest-path-only stepping: face the local target, then move.

    No safety or proximity terms; used by the navigation ablation.
    """
    d = np.asarray(p_local) - pose.xy
    if np.linalg.norm(d) < 1e-9:
        return Action.TURN_LEFT
    err = wrap_angle(math.atan2(d[1], d[0]) - pose.yaw)
    if abs(err) > TURN_ANGLE / 2 or forbid_forward:
        if forbid_forward and prefer_turn in (Action.TURN_LEFT, Action.TURN_RIGHT):
            return prefer_turn
        return Action.TURN_LEFT if err > 0 else Action.TURN_RIGHT
    return Action.MOVE_FORWARD
