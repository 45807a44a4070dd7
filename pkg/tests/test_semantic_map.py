import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from semnav.frontiers import FrontierCluster
from semnav.geometry import Pose
from semnav.grid import GridMap
from semnav.semantic_map import (
    FramedScore, SemanticScoreMap, angular_confidence, frontier_score,
    fuse_cell, project_frame,
)

FOV = math.pi / 2


def make_grid(w=12.0, h=12.0):
    return GridMap(width_m=w, height_m=h, resolution=0.05, origin=(0.0, 0.0))


# ---------------------------------------------------------------- scalars

def test_angular_confidence_on_axis():
    assert angular_confidence(0.0, FOV) == pytest.approx(1.0)


def test_angular_confidence_at_rim():
    assert angular_confidence(FOV / 2, FOV) == pytest.approx(0.0, abs=1e-12)
    assert angular_confidence(-FOV / 2, FOV) == pytest.approx(0.0, abs=1e-12)


def test_angular_confidence_quarter():
    # theta = fov/4 -> cos^2(pi/4) = 0.5
    assert angular_confidence(FOV / 4, FOV) == pytest.approx(0.5)


def test_angular_confidence_domain_error():
    with pytest.raises(ValueError):
        angular_confidence(FOV, FOV)


def test_fuse_cell_zero_prior():
    assert fuse_cell(0.8, 1.0, 0.4, 0.0) == pytest.approx((0.8, 1.0))


def test_fuse_cell_fixed_point():
    assert fuse_cell(0.5, 0.7, 0.5, 0.7) == pytest.approx((0.5, 0.7))


def test_fuse_cell_arithmetic():
    s, c = fuse_cell(0.6, 0.5, 0.2, 0.25)
    assert s == pytest.approx(0.46667, abs=1e-5)
    assert c == pytest.approx(0.41667, abs=1e-5)


def test_fuse_cell_no_update_signal():
    assert fuse_cell(0.3, 0.0, 0.9, 0.0) is None


conf_values = st.one_of(st.just(0.0), st.floats(1e-9, 1))


@given(
    s1=st.floats(0, 1), c1=conf_values,
    s0=st.floats(0, 1), c0=conf_values,
)
def test_fuse_cell_bounds(s1, c1, s0, c0):
    out = fuse_cell(s1, c1, s0, c0)
    if c1 + c0 <= 0:
        assert out is None
        return
    s, c = out
    assert min(s1, s0) - 1e-12 <= s <= max(s1, s0) + 1e-12
    assert min(c1, c0) - 1e-12 <= c <= max(c1, c0) + 1e-12
    if abs(c1 - c0) > 1e-9:
        assert min(c1, c0) < c < max(c1, c0) or math.isclose(c, max(c1, c0))


def test_confidence_equality_iff_equal_inputs():
    _, c = fuse_cell(0.1, 0.4, 0.9, 0.4)
    assert c == pytest.approx(0.4)


def test_repeated_fusion_attracts_score():
    s, c = 0.1, 0.2
    target = 0.9
    prev_gap = abs(target - s)
    for _ in range(20):
        s, c = fuse_cell(target, 0.8, s, c)
        gap = abs(target - s)
        assert gap <= prev_gap + 1e-12
        prev_gap = gap
    assert s == pytest.approx(target, abs=0.01)


# ------------------------------------------------------------ projection

def open_grid(g):
    """Mark everything free."""
    g.set_free(np.argwhere(np.ones((g.height, g.width), dtype=bool)))
    return g


def test_zero_score_frame_marks_cells_with_confidence():
    g = open_grid(make_grid())
    sem = SemanticScoreMap(g)
    frame = FramedScore(Pose(2.0, 6.0, 0.0), 0.0, FOV)
    project_frame(sem, g, frame)
    r, c = g.world_to_cell((4.0, 6.0))
    assert sem.score[r, c] == 0.0
    assert sem.conf[r, c] > 0.9


def test_on_axis_cell_takes_full_confidence():
    g = open_grid(make_grid())
    sem = SemanticScoreMap(g)
    frame = FramedScore(Pose(2.0, 6.025, 0.0), 0.7, FOV)
    project_frame(sem, g, frame)
    r, c = g.world_to_cell((4.0, 6.025))  # exactly ahead, same cell row
    assert sem.score[r, c] == pytest.approx(0.7)
    assert sem.conf[r, c] == pytest.approx(1.0, abs=5e-4)


def test_two_frames_match_scalar_fusion_sequence():
    g = open_grid(make_grid())
    sem = SemanticScoreMap(g)
    cell_xy = (6.025, 6.025)
    f1 = FramedScore(Pose(4.0, 6.025, 0.0), 0.9, FOV)       # looking +x
    f2 = FramedScore(Pose(6.025, 4.0, math.pi / 2), 0.3, FOV)  # looking +y
    project_frame(sem, g, f1)
    project_frame(sem, g, f2)
    r, c = g.world_to_cell(cell_xy)

    # oracle: the same two updates applied through the scalar recurrence
    cx, cy = g.cell_center(r, c)
    th1 = math.atan2(cy - 6.025, cx - 4.0) - 0.0
    c1 = angular_confidence(th1, FOV)
    s, cf = fuse_cell(0.9, c1, 0.0, 0.0)
    th2 = math.atan2(cy - 4.0, cx - 6.025) - math.pi / 2
    c2 = angular_confidence(th2, FOV)
    s, cf = fuse_cell(0.3, c2, s, cf)
    assert sem.score[r, c] == pytest.approx(s, abs=1e-9)
    assert sem.conf[r, c] == pytest.approx(cf, abs=1e-9)


def test_cells_behind_walls_never_updated():
    g = open_grid(make_grid())
    # vertical wall at x = 6 m spanning y in [4, 8]
    wall = [(r, int(6.0 / 0.05)) for r in range(int(4.0 / 0.05), int(8.0 / 0.05))]
    g.set_occupied(np.array(wall))
    sem = SemanticScoreMap(g)
    frame = FramedScore(Pose(4.0, 6.0, 0.0), 0.8, FOV)
    project_frame(sem, g, frame)
    r, c = g.world_to_cell((7.0, 6.0))  # directly behind the wall
    assert sem.conf[r, c] == 0.0
    r2, c2 = g.world_to_cell((5.0, 6.0))  # in front of the wall
    assert sem.conf[r2, c2] > 0.0


def test_range_limit_gates_projection():
    g = open_grid(make_grid())
    sem = SemanticScoreMap(g)
    frame = FramedScore(Pose(1.0, 6.0, 0.0), 0.8, FOV)
    project_frame(sem, g, frame, max_range=5.0)
    r, c = g.world_to_cell((6.5, 6.0))  # 5.5 m out
    assert sem.conf[r, c] == 0.0


# -------------------------------------------------------- frontier score

def cluster_at(g, xy):
    r, c = g.world_to_cell(xy)
    cells = np.array([(r, c - 1), (r, c), (r, c + 1)])
    return FrontierCluster(0, cells, g.cell_centers(cells).mean(axis=0))


def test_frontier_score_unobserved_neighborhood():
    g = open_grid(make_grid())
    sem = SemanticScoreMap(g)
    assert frontier_score(sem, cluster_at(g, (6.0, 6.0))) == 0.0


def test_frontier_score_uniform_neighborhood():
    g = open_grid(make_grid())
    sem = SemanticScoreMap(g)
    sem.score[:, :] = 0.4
    sem.conf[:, :] = 1.0
    assert frontier_score(sem, cluster_at(g, (6.0, 6.0))) == pytest.approx(0.4)


def test_frontier_score_weighted_mean():
    g = open_grid(make_grid())
    sem = SemanticScoreMap(g)
    cl = cluster_at(g, (6.0, 6.0))
    cx, cy = cl.center
    rr, cc = np.mgrid[0:g.height, 0:g.width]
    px = g.origin[0] + (cc + 0.5) * 0.05
    py = g.origin[1] + (rr + 0.5) * 0.05
    disc = (px - cx) ** 2 + (py - cy) ** 2 <= 0.5 ** 2
    half = disc & (px <= cx)
    other = disc & (px > cx)
    sem.score[half], sem.conf[half] = 0.8, 1.0
    sem.score[other], sem.conf[other] = 0.2, 0.5
    n1, n2 = half.sum(), other.sum()
    want = (0.8 * 1.0 * n1 + 0.2 * 0.5 * n2) / (1.0 * n1 + 0.5 * n2)
    assert frontier_score(sem, cl) == pytest.approx(want)


def test_frontier_score_example_mixed_pair():
    # two-cell neighborhood {(0.8, 1.0), (0.2, 0.5)} -> 0.6
    g = make_grid(w=1.0, h=1.0)
    sem = SemanticScoreMap(g)
    cl = FrontierCluster(0, np.array([(10, 10)]), g.cell_center(10, 10))
    sem.score[10, 10], sem.conf[10, 10] = 0.8, 1.0
    sem.score[10, 11], sem.conf[10, 11] = 0.2, 0.5
    assert frontier_score(sem, cl, radius=0.08) == pytest.approx(0.6)
