import math

import numpy as np
import pytest

from semnav.metrics import (
    AggregateMetrics, EpisodeResult, classify_failure, compute_metrics,
    episode_softspl, episode_spl, goal_cells, goal_distance_field,
    score_episode,
)
from semnav.knowledge import load_profile
from semnav.runner import crafted_scene


def result(**kw):
    base = dict(episode=0, family="apartment", scene_seed=0, target="toilet",
                outcome="A", success=True, steps=100, path_length=10.0,
                shortest_path=10.0, d_init=10.0, d_final=0.0, collisions=0,
                stop_kind="target", near_target=True)
    base.update(kw)
    return score_episode(EpisodeResult(**base))


def test_spl_perfect_path():
    assert episode_spl(True, 10.0, 10.0) == 1.0


def test_spl_zero_on_failure():
    assert episode_spl(False, 5.0, 10.0) == 0.0


def test_spl_half_on_double_path():
    assert episode_spl(True, 20.0, 10.0) == pytest.approx(0.5)


def test_softspl_habitat_form():
    # (1 - min(1, d_T / d_init)) * l / max(p, l)
    v = episode_softspl(d_final=2.0, d_init=10.0, p=20.0, l=10.0)
    assert v == pytest.approx(0.8 * 0.5)
    assert episode_softspl(12.0, 10.0, 10.0, 10.0) == 0.0   # moved away
    assert 0.0 <= episode_softspl(3.0, 9.0, 4.0, 9.0) <= 1.0


def test_per_episode_bounds():
    r = result(path_length=3.0, shortest_path=7.0)
    assert r.spl <= 1.0
    rf = result(success=False, outcome="E")
    assert rf.spl == 0.0
    assert 0.0 <= rf.softspl <= 1.0


def test_classification_precedence():
    assert classify_failure(True, False, "target", True, False) == "A"
    assert classify_failure(False, True, None, False, False) == "B"
    assert classify_failure(False, False, "target", True, False) == "C"
    assert classify_failure(False, False, None, True, True) == "F"
    assert classify_failure(False, False, "exhausted", False, False) == "D"
    assert classify_failure(False, False, None, False, True) == "E"


def test_classification_totality():
    for success in (False,):
        for off in (True, False):
            for stop in ("target", "exhausted", None):
                for near in (True, False):
                    for out in (True, False):
                        c = classify_failure(success, off, stop, near, out)
                        assert c in "ABCDEF"


def test_empty_aggregate():
    agg = compute_metrics([])
    assert agg.episodes == 0 and agg.sr == 0.0


def test_aggregate_means():
    rs = [result(), result(success=False, outcome="E", path_length=20.0,
                           d_final=4.0)]
    agg = compute_metrics(rs)
    assert agg.episodes == 2
    assert agg.sr == 50.0
    assert agg.spl == pytest.approx(0.5)
    assert agg.failures["A"] == 1 and agg.failures["E"] == 1
    assert agg.dtg == pytest.approx(2.0)


def test_goal_field_zero_on_ring():
    kb = load_profile("hm3d")
    scene = crafted_scene("trivial")
    g = scene.rasterize()
    cells = goal_cells(g, scene)
    assert len(cells) > 0
    field = goal_distance_field(g, scene)
    assert field[cells[0][0], cells[0][1]] == 0.0
    start_rc = g.world_to_cell(scene.start.xy)
    d = field[start_rc]
    assert np.isfinite(d)
    euclid = scene.target_distance(scene.start.xy)
    assert d >= euclid - 0.6  # geodesic at least euclid minus ring radius
