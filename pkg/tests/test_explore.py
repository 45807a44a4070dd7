import itertools
import math
from functools import lru_cache

import numpy as np
import pytest

from semnav.explore import (
    ExplorationState, Mode, ModeStats, Policy, StrategyConfig,
    build_tsp_matrix, held_karp_tour, next_waypoint, score_stats,
    select_high_score_frontiers, select_mode, solve_atsp,
)
from semnav.frontiers import FrontierCluster
from semnav.grid import GridMap
from semnav.nav import NavParams, PlanningGrid


def cfg(**kw):
    return StrategyConfig(**kw)


# ------------------------------------------------------------- statistics

def test_stats_uniform_scores():
    s = score_stats([0.2, 0.2, 0.2])
    assert s.r == 1.0 and s.n_f == 3
    assert s.sigma == pytest.approx(0.0, abs=1e-12)


def test_stats_single_frontier():
    s = score_stats([0.5])
    assert s.r == 1.0 and s.sigma == 0.0 and s.n_f == 1


def test_stats_arithmetic():
    s = score_stats([0.9, 0.1, 0.2])
    assert s.s_mean == pytest.approx(0.4)
    assert s.r == pytest.approx(2.25)
    assert s.sigma == pytest.approx(0.35590, abs=1e-5)


def test_stats_empty():
    s = score_stats([])
    assert (s.r, s.sigma, s.n_f) == (1.0, 0.0, 0)


def test_stats_zero_mean_convention():
    s = score_stats([0.0, 0.0])
    assert s.r == 1.0


def test_mode_truth_table():
    c = cfg()
    assert select_mode(ModeStats(1.0, 0.0, 3, 0, 0), c) == Mode.GEOMETRY
    assert select_mode(ModeStats(2.25, 0.356, 3, 0, 0), c) == Mode.SEMANTIC
    # each single-threshold violation falls back to geometry
    assert select_mode(ModeStats(1.2, 0.01, 3, 0, 0), c) == Mode.GEOMETRY
    assert select_mode(ModeStats(1.05, 0.5, 3, 0, 0), c) == Mode.GEOMETRY


def test_scale_stability_of_r_sigma_scaling():
    scores = [0.12, 0.5, 0.31, 0.07]
    base = score_stats(scores)
    for k in (0.5, 2.0, 7.0):
        scaled = score_stats([k * s for s in scores])
        assert scaled.r == pytest.approx(base.r)
        assert scaled.sigma == pytest.approx(k * base.sigma)


# ------------------------------------------------------------ subset rule

def mk_cluster(i, x, y, score):
    cells = np.array([(int(y / 0.05), int(x / 0.05))])
    return FrontierCluster(i, cells, np.array([x, y], float), score)


def test_subset_all_equal_scores_capped():
    cls = [mk_cluster(i, float(i), 0.0, 0.5) for i in range(12)]
    got = select_high_score_frontiers(cls, (0.0, 0.0), beta=0.85, cap=8)
    assert len(got) == 8
    # ties broken by distance to the agent
    assert [c.id for c in got] == list(range(8))


def test_subset_threshold_arithmetic():
    cls = [mk_cluster(0, 1, 0, 0.9), mk_cluster(1, 2, 0, 0.8),
           mk_cluster(2, 3, 0, 0.3)]
    got = select_high_score_frontiers(cls, (0.0, 0.0))
    assert [c.id for c in got] == [0, 1]


def test_subset_single_cluster():
    cls = [mk_cluster(0, 1, 0, 0.2)]
    assert select_high_score_frontiers(cls, (0, 0)) == cls


# ------------------------------------------------------------- tsp matrix

def corridor_grid():
    g = GridMap(width_m=4.0, height_m=1.0, resolution=0.05, origin=(0.0, 0.0))
    g.set_free(np.argwhere(np.ones((g.height, g.width), dtype=bool)))
    return g


def test_tsp_matrix_collinear_corridor():
    g = corridor_grid()
    pg = PlanningGrid(g, NavParams(inflation=0.0))
    y = 0.525
    agent = (0.525, y)
    f1 = mk_cluster(0, 1.525, y, 0.5)
    f2 = mk_cluster(1, 2.525, y, 0.5)
    mat = build_tsp_matrix(agent, [f1, f2], pg)
    assert np.allclose(mat[:, 0], 0.0)
    assert mat[0, 1] == pytest.approx(1.0, abs=1e-9)
    assert mat[0, 2] == pytest.approx(2.0, abs=1e-9)
    assert mat[1, 2] == pytest.approx(1.0, abs=1e-9)
    assert mat[2, 1] == pytest.approx(1.0, abs=1e-9)
    assert np.all(np.diag(mat) == 0.0)


def test_tsp_matrix_detour_behind_wall():
    g = GridMap(width_m=4.0, height_m=4.0, resolution=0.05, origin=(0, 0))
    g.set_free(np.argwhere(np.ones((g.height, g.width), dtype=bool)))
    wall = [(r, 40) for r in range(0, 60)]  # wall at x=2 from y=0 to y=3
    g.set_occupied(np.array(wall))
    pg = PlanningGrid(g, NavParams(inflation=0.0))
    agent = (1.025, 0.525)
    f1 = mk_cluster(0, 3.025, 0.525, 0.5)
    mat = build_tsp_matrix(agent, [f1], pg)
    euclid = 2.0
    assert mat[0, 1] > euclid + 1.0  # forced detour over the wall top


# ------------------------------------------------------------------- atsp

def _brute_force_tour(mat):
    n = len(mat)
    best = (math.inf, None)
    for perm in itertools.permutations(range(1, n)):
        c = mat[0, perm[0]]
        for a, b in zip(perm[:-1], perm[1:]):
            c += mat[a, b]
        c += mat[perm[-1], 0]
        if c < best[0] - 1e-12:
            best = (c, list(perm))
    return best


def _held_karp_oracle(mat):
    """Recursive memoized formulation, independent of the solver's DP."""
    n = len(mat)

    @lru_cache(maxsize=None)
    def visit(mask, last):
        if mask == (1 << (n - 1)) - 1:
            return mat[last, 0]
        best = math.inf
        for k in range(1, n):
            bit = 1 << (k - 1)
            if mask & bit:
                continue
            best = min(best, mat[last, k] + visit(mask | bit, k))
        return best

    return visit(0, 0)


def test_atsp_single_frontier():
    mat = np.array([[0.0, 3.0], [0.0, 0.0]])
    assert solve_atsp(mat) == [1]


def test_atsp_corridor_order():
    mat = np.array([
        [0.0, 1.0, 2.0],
        [0.0, 0.0, 1.0],
        [0.0, 1.0, 0.0],
    ])
    assert solve_atsp(mat) == [1, 2]


def test_atsp_matches_brute_force_small():
    rng = np.random.default_rng(42)
    for _ in range(60):
        m = int(rng.integers(2, 8))
        mat = rng.uniform(0.1, 10.0, size=(m + 1, m + 1))
        np.fill_diagonal(mat, 0.0)
        mat[:, 0] = 0.0
        cost_bf, _ = _brute_force_tour(mat)
        order = solve_atsp(mat)
        c = mat[0, order[0]]
        for a, b in zip(order[:-1], order[1:]):
            c += mat[a, b]
        c += mat[order[-1], 0]
        assert c == pytest.approx(cost_bf, abs=1e-9)
        assert sorted(order) == list(range(1, m + 1))


def test_atsp_matches_held_karp_oracle_larger():
    rng = np.random.default_rng(9)
    for _ in range(20):
        m = int(rng.integers(8, 11))
        mat = rng.uniform(0.1, 10.0, size=(m + 1, m + 1))
        np.fill_diagonal(mat, 0.0)
        mat[:, 0] = 0.0
        want = _held_karp_oracle(tuple(map(tuple, mat)) and mat)
        order = solve_atsp(mat)
        c = mat[0, order[0]]
        for a, b in zip(order[:-1], order[1:]):
            c += mat[a, b]
        c += mat[order[-1], 0]
        assert c == pytest.approx(want, abs=1e-9)


def test_heuristic_tour_visits_everything():
    rng = np.random.default_rng(4)
    m = 18
    mat = rng.uniform(0.5, 5.0, size=(m + 1, m + 1))
    np.fill_diagonal(mat, 0.0)
    mat[:, 0] = 0.0
    order = solve_atsp(mat)
    assert sorted(order) == list(range(1, m + 1))


# ----------------------------------------------------------- next_waypoint

def open_pg(w=6.0, h=6.0):
    g = GridMap(width_m=w, height_m=h, resolution=0.05, origin=(0, 0))
    g.set_free(np.argwhere(np.ones((g.height, g.width), dtype=bool)))
    return PlanningGrid(g, NavParams(inflation=0.0))


def test_uniform_scores_geometry_nearest():
    pg = open_pg()
    cls = [mk_cluster(0, 1.5, 1.0, 0.3), mk_cluster(1, 4.0, 4.0, 0.3)]
    out = next_waypoint((1.0, 1.0), cls, pg, cfg(), ExplorationState())
    assert out.mode == Mode.GEOMETRY
    assert out.cluster.id == 0


def test_dominant_score_semantic_first():
    pg = open_pg()
    cls = [mk_cluster(0, 4.0, 4.0, 0.9), mk_cluster(1, 1.5, 1.0, 0.1),
           mk_cluster(2, 2.0, 1.0, 0.1)]
    out = next_waypoint((1.0, 1.0), cls, pg, cfg(), ExplorationState())
    assert out.mode == Mode.SEMANTIC
    assert out.cluster.id == 0


def test_semantic_greedy_ignores_distance():
    pg = open_pg()
    cls = [mk_cluster(0, 1.2, 1.0, 0.3), mk_cluster(1, 5.0, 5.0, 0.7)]
    out = next_waypoint((1.0, 1.0), cls, pg,
                        cfg(policy=Policy.SEMANTIC_GREEDY), ExplorationState())
    assert out.cluster.id == 1


def test_zero_scores_adaptive_degenerates_to_geometry():
    pg = open_pg()
    cls = [mk_cluster(0, 5.0, 5.0, 0.0), mk_cluster(1, 2.0, 1.0, 0.0)]
    out = next_waypoint((1.0, 1.0), cls, pg, cfg(), ExplorationState())
    assert out.mode == Mode.GEOMETRY
    assert out.cluster.id == 1


def test_no_clusters_returns_none():
    pg = open_pg()
    assert next_waypoint((1.0, 1.0), [], pg, cfg(), ExplorationState()) is None


def test_sticky_goal_until_reached_or_gone():
    pg = open_pg()
    cls = [mk_cluster(0, 4.0, 1.0, 0.3), mk_cluster(1, 4.5, 1.0, 0.3)]
    state = ExplorationState()
    out1 = next_waypoint((1.0, 1.0), cls, pg, cfg(), state)
    assert out1.replanned
    # a new slightly-nearer cluster appears, but the goal survives
    cls2 = cls + [mk_cluster(2, 3.0, 1.0, 0.3)]
    out2 = next_waypoint((1.2, 1.0), cls2, pg, cfg(), state)
    assert not out2.replanned and out2.cluster.id == out1.cluster.id
    # goal cluster re-clustered in place: its successor inherits the goal
    cls3 = [mk_cluster(3, 4.05, 1.0, 0.3)] + [c for c in cls2 if c.id != 0]
    out3 = next_waypoint((1.2, 1.0), cls3, pg, cfg(), state)
    assert not out3.replanned and out3.cluster.id == 3
    # goal region gone entirely -> replan
    cls4 = [c for c in cls2 if c.id in (1, 2)]
    out4 = next_waypoint((1.2, 1.0), cls4, pg, cfg(), state)
    assert out4.replanned


def test_utility_policy_score_over_pathlength():
    pg = open_pg()
    # near low-score vs far high-score: utility prefers best ratio
    cls = [mk_cluster(0, 2.0, 1.0, 0.4), mk_cluster(1, 5.0, 1.0, 0.5)]
    out = next_waypoint((1.0, 1.0), cls, pg,
                        cfg(policy=Policy.UTILITY), ExplorationState())
    # 0.4 / 1.0 > 0.5 / 4.0
    assert out.cluster.id == 0


def test_geometry_tsp_over_all_clusters():
    pg = open_pg()
    cls = [mk_cluster(0, 2.0, 1.0, 0.9), mk_cluster(1, 1.5, 1.0, 0.1)]
    out = next_waypoint((1.0, 1.0), cls, pg,
                        cfg(policy=Policy.GEOMETRY_TSP), ExplorationState())
    # nearest-first tour over all clusters regardless of score
    assert out.cluster.id == 1
    assert out.mode == Mode.GEOMETRY
