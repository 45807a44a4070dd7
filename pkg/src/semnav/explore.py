"""Exploration mode selection and frontier waypoint planning.

The frontier-score distribution decides the mode: when both the max-to-mean
ratio and the standard deviation clear their thresholds, exploration turns
semantic (tour over high-score frontiers); otherwise it stays geometric
(nearest frontier). Fixed single-mode policies and the utility baseline are
available for ablations.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .frontiers import FrontierCluster
from .grid import GridMap
from .nav import NoRouteError, PlanningGrid, astar, dijkstra_field

UNREACHABLE_COST = 1e6     # meters; keeps unreachable frontiers at tour end
HELD_KARP_LIMIT = 12


class Mode(Enum):
    SEMANTIC = "semantic"
    GEOMETRY = "geometry"


class Policy(Enum):
    ADAPTIVE = "adaptive"
    SEMANTIC_TSP = "sem-tsp"
    SEMANTIC_GREEDY = "sem-greedy"
    GEOMETRY_GREEDY = "geo-greedy"
    GEOMETRY_TSP = "geo-tsp"
    UTILITY = "utility"


@dataclass
class ModeStats:
    r: float
    sigma: float
    n_f: int
    s_max: float
    s_mean: float


@dataclass
class StrategyConfig:
    r_t: float = 1.10
    sigma_t: float = 0.015
    policy: Policy = Policy.ADAPTIVE
    subset_beta: float = 0.85    # keep frontiers scoring >= beta * s_max
    subset_cap: int = 8          # at most this many tour nodes
    sticky_reach: float = 0.3    # goal considered reached within this radius


def score_stats(scores) -> ModeStats:
    """Max-to-mean ratio and population standard deviation of the scores."""
    arr = np.asarray(list(scores), dtype=float)
    n = len(arr)
    if n == 0:
        return ModeStats(1.0, 0.0, 0, 0.0, 0.0)
    mean = float(arr.mean())
    smax = float(arr.max())
    r = max(1.0, smax / mean) if mean > 0 else 1.0
    sigma = float(np.sqrt(((arr - mean) ** 2).mean()))
    return ModeStats(r, sigma, n, smax, mean)


def select_mode(stats: ModeStats, cfg: StrategyConfig) -> Mode:
    """Semantic only when both statistics exceed their thresholds."""
    if stats.r > cfg.r_t and stats.sigma > cfg.sigma_t:
        return Mode.SEMANTIC
    return Mode.GEOMETRY


def select_high_score_frontiers(clusters: list[FrontierCluster], agent_xy,
                                beta: float = 0.85,
                                cap: int = 8) -> list[FrontierCluster]:
    """Frontiers scoring at least beta * s_max, capped; ties resolve to the
    cluster nearer the agent, then to the smaller id."""
    if not clusters:
        return []
    s_max = max(cl.score for cl in clusters)
    agent_xy = np.asarray(agent_xy, dtype=float)
    eligible = [cl for cl in clusters if cl.score >= beta * s_max - 1e-12]
    eligible.sort(key=lambda cl: (-cl.score,
                                  float(np.linalg.norm(cl.center - agent_xy)),
                                  cl.id))
    return eligible[:cap]


def build_tsp_matrix(agent_xy, frontiers: list[FrontierCluster],
                     pg: PlanningGrid) -> np.ndarray:
    """Asymmetric tour cost matrix: node 0 is the agent, return cost zero.

    Entries are shortest-path distances in meters on the planning grid;
    unreachable pairs carry a large finite penalty.
    """
    from .nav import _csgraph_distances

    pts = [np.asarray(agent_xy, dtype=float)] + [cl.center for cl in frontiers]
    n = len(pts)
    mat = np.zeros((n, n))
    grid = pg.grid
    target_rc = [grid.world_to_cell(p) for p in pts]
    fields = _csgraph_distances(pg, target_rc)
    for i in range(n):
        for j in range(1, n):
            if i == j:
                continue
            d = fields.at(i, target_rc[j])
            mat[i, j] = d if np.isfinite(d) else UNREACHABLE_COST
    if n > 1 and (mat[0, 1:] >= UNREACHABLE_COST).all():
        raise NoRouteError("agent cannot reach any frontier")
    return mat


def held_karp_tour(mat: np.ndarray) -> tuple[float, list[int]]:
    """Exact minimum Hamiltonian cycle from node 0 by subset DP.

    Returns (cost, visit order of nodes 1..n-1). With a zero return column
    the cycle is equivalent to the optimal open visiting path.
    """
    n = len(mat)
    if n == 1:
        return 0.0, []
    m = n - 1
    full = 1 << m
    inner = np.asarray(mat[1:, 1:], dtype=float)
    dp = np.full((full, m), np.inf)
    parent = np.full((full, m), -1, dtype=np.int64)
    for j in range(m):
        dp[1 << j, j] = mat[0, j + 1]
    bits = [np.array([(mask >> j) & 1 for j in range(m)], dtype=bool)
            for mask in range(full)]
    for mask in range(1, full):
        row = dp[mask]
        inmask = bits[mask]
        if not np.isfinite(row[inmask]).any():
            continue
        # extend the best path ending at j by every k outside the mask
        ext = row[:, None] + inner               # (j, k)
        ext[~inmask, :] = np.inf
        best_j = np.argmin(ext, axis=0)
        best_c = ext[best_j, np.arange(m)]
        for k in np.nonzero(~inmask)[0]:
            nm = mask | (1 << k)
            if best_c[k] < dp[nm, k]:
                dp[nm, k] = best_c[k]
                parent[nm, k] = best_j[k]
    last_mask = full - 1
    closing = dp[last_mask] + mat[1:, 0]
    best_end = int(np.argmin(closing))
    best_cost = float(closing[best_end])
    order = []
    mask, j = last_mask, best_end
    while j >= 0:
        order.append(j + 1)
        pj = parent[mask, j]
        mask ^= 1 << j
        j = pj
    order.reverse()
    return best_cost, order


def _nn_or_opt_tour(mat: np.ndarray) -> tuple[float, list[int]]:
    """Nearest-neighbor start plus Or-opt segment relocation.

    Relocation keeps segment direction, so it is safe for asymmetric costs.
    """
    n = len(mat)
    unvisited = set(range(1, n))
    order = []
    cur = 0
    while unvisited:
        nxt = min(unvisited, key=lambda j: (mat[cur, j], j))
        order.append(nxt)
        unvisited.discard(nxt)
        cur = nxt

    def tour_cost(seq):
        c = mat[0, seq[0]]
        for a, b in zip(seq[:-1], seq[1:]):
            c += mat[a, b]
        return c + mat[seq[-1], 0]

    improved = True
    while improved:
        improved = False
        for seg_len in (1, 2, 3):
            i = 0
            while i + seg_len <= len(order):
                seg = order[i:i + seg_len]
                rest = order[:i] + order[i + seg_len:]
                if not rest:
                    break
                cyc = [0] + order + [0]
                prev_node, next_node = cyc[i], cyc[i + seg_len + 1]
                gain = (mat[prev_node, seg[0]] + mat[seg[-1], next_node]
                        - mat[prev_node, next_node])
                best_delta = -1e-12
                best_pos = None
                rcyc = [0] + rest + [0]
                for j in range(len(rest) + 1):
                    a, b = rcyc[j], rcyc[j + 1]
                    add = mat[a, seg[0]] + mat[seg[-1], b] - mat[a, b]
                    delta = add - gain
                    if delta < best_delta:
                        best_delta = delta
                        best_pos = j
                if best_pos is not None:
                    order = rest[:best_pos] + seg + rest[best_pos:]
                    improved = True
                else:
                    i += 1
    return tour_cost(order), order


def solve_atsp(mat: np.ndarray) -> list[int]:
    """Visit order (matrix node indices 1..N) minimizing the cycle cost.

    Exact subset DP up to HELD_KARP_LIMIT frontiers, heuristic beyond.
    """
    n = len(mat)
    if n <= 1:
        return []
    if n == 2:
        return [1]
    if n - 1 <= HELD_KARP_LIMIT:
        _, order = held_karp_tour(mat)
    else:
        _, order = _nn_or_opt_tour(mat)
    return order


@dataclass
class ExplorationState:
    """Sticky goal and mode-debounce bookkeeping between replans."""

    goal_id: int | None = None
    goal_point: np.ndarray | None = None
    goal_cells: set | None = None
    mode: Mode | None = None
    pending_mode: Mode | None = None
    pending_count: int = 0

MODE_DEBOUNCE = 3


@dataclass
class WaypointChoice:
    cluster: FrontierCluster
    mode: Mode
    stats: ModeStats
    replanned: bool


def _reachable(clusters, dist_field, grid):
    out = []
    for cl in clusters:
        rc = grid.world_to_cell(cl.center)
        if grid.in_bounds(*rc):
            d = dist_field[rc]
            if np.isfinite(d):
                out.append((cl, float(d)))
    return out


def _tsp_first(agent_xy, subset, pg):
    try:
        mat = build_tsp_matrix(agent_xy, subset, pg)
    except NoRouteError:
        return None
    for idx in solve_atsp(mat):
        if mat[0, idx] < UNREACHABLE_COST:
            return subset[idx - 1]
    return None


def next_waypoint(agent_xy, clusters: list[FrontierCluster], pg: PlanningGrid,
                  cfg: StrategyConfig, state: ExplorationState) -> WaypointChoice | None:
    """Choose the next frontier waypoint under the configured policy.

    Returns None when no frontier is reachable (the no-frontier signal).
    The previous goal stays sticky while its cluster id survives, the mode
    is unchanged, and the agent is not yet within sticky_reach of it.
    """
    stats = score_stats([cl.score for cl in clusters])
    if not clusters:
        state.goal_id = None
        state.goal_cells = None
        return None

    if cfg.policy == Policy.ADAPTIVE:
        raw_mode = select_mode(stats, cfg)
        # debounce: flip only after the decision disagrees for a few
        # consecutive steps, otherwise threshold jitter whipsaws the goal
        if state.mode is None:
            mode = raw_mode
        elif raw_mode != state.mode:
            if state.pending_mode == raw_mode:
                state.pending_count += 1
            else:
                state.pending_mode = raw_mode
                state.pending_count = 1
            mode = raw_mode if state.pending_count >= MODE_DEBOUNCE \
                else state.mode
        else:
            state.pending_mode = None
            state.pending_count = 0
            mode = state.mode
    elif cfg.policy in (Policy.SEMANTIC_TSP, Policy.SEMANTIC_GREEDY, Policy.UTILITY):
        mode = Mode.SEMANTIC
    else:
        mode = Mode.GEOMETRY

    agent_xy = np.asarray(agent_xy, dtype=float)
    # the sticky shield belongs to the full adaptive pipeline; the fixed
    # single-mode baselines re-decide greedily every step, as defined.
    # the goal also survives a mode flip: dropping a half-reached goal on
    # a threshold crossing wastes the walk both ways
    if cfg.policy == Policy.ADAPTIVE and state.goal_cells is not None:
        # the goal survives re-clustering: adopt whichever current cluster
        # inherited the sticky goal's cells (max overlap, center fallback)
        match = None
        best = 0
        for cl in clusters:
            ov = sum(1 for r, c in cl.cells if (int(r), int(c)) in state.goal_cells)
            if ov > best:
                match = cl
                best = ov
        if match is None:
            for cl in clusters:
                if float(np.linalg.norm(cl.center - state.goal_point)) < 0.3:
                    match = cl
                    break
        if match is not None and \
                float(np.linalg.norm(match.center - agent_xy)) > cfg.sticky_reach:
            state.goal_id = match.id
            state.goal_point = match.center
            state.goal_cells = {(int(r), int(c)) for r, c in match.cells}
            return WaypointChoice(match, mode, stats, replanned=False)

    grid = pg.grid
    if cfg.policy == Policy.ADAPTIVE:
        method = "tsp-subset" if mode == Mode.SEMANTIC else "nearest"
    else:
        method = {
            Policy.SEMANTIC_TSP: "tsp-subset",
            Policy.SEMANTIC_GREEDY: "greedy-score",
            Policy.GEOMETRY_GREEDY: "nearest",
            Policy.GEOMETRY_TSP: "tsp-all",
            Policy.UTILITY: "utility",
        }[cfg.policy]

    choice: FrontierCluster | None = None
    if method == "greedy-score":
        choice = max(clusters, key=lambda cl: (cl.score, -cl.id))
    elif method == "tsp-subset":
        subset = select_high_score_frontiers(clusters, agent_xy,
                                             cfg.subset_beta, cfg.subset_cap)
        choice = _tsp_first(agent_xy, subset, pg)
    elif method == "tsp-all":
        choice = _tsp_first(agent_xy, sorted(clusters, key=lambda cl: cl.id), pg)
    elif method == "utility":
        from .nav import _csgraph_distances
        fields = _csgraph_distances(pg, [grid.world_to_cell(agent_xy)])
        cand = []
        for cl in clusters:
            d = fields.at(0, grid.world_to_cell(cl.center))
            if np.isfinite(d):
                cand.append((cl, d))
        if cand:
            choice = max(cand, key=lambda t: (t[0].score / max(t[1], 1e-6),
                                              -t[1], -t[0].id))[0]
    else:
        # nearest frontier: the first target Dijkstra settles is the argmin
        dist, settled = dijkstra_field(
            pg, agent_xy,
            targets_rc=[grid.world_to_cell(cl.center) for cl in clusters],
            stop_at_first=True)
        cand = [(cl, float(dist[grid.world_to_cell(cl.center)]))
                for cl in clusters
                if settled[grid.world_to_cell(cl.center)]]
        if cand:
            choice = min(cand, key=lambda t: (t[1], t[0].id))[0]

    if choice is None:
        state.goal_id = None
        state.goal_cells = None
        return None
    state.goal_id = choice.id
    state.goal_point = choice.center
    state.goal_cells = {(int(r), int(c)) for r, c in choice.cells}
    state.mode = mode
    return WaypointChoice(choice, mode, stats, replanned=True)
