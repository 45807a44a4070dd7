import json
import math

import numpy as np
import pytest

from semnav.knowledge import load_profile
from semnav.nav import NavParams, PlanningGrid, dijkstra_field
from semnav.scene import FAMILIES, Scene, generate_scene


@pytest.fixture(scope="module")
def kb():
    return load_profile("hm3d")


def test_same_seed_same_scene(kb):
    a = generate_scene(3, "apartment", "toilet", kb)
    b = generate_scene(3, "apartment", "toilet", kb)
    assert json.dumps(a.to_json(), sort_keys=True) == \
        json.dumps(b.to_json(), sort_keys=True)


def test_different_floor_has_no_reachable_target(kb):
    s = generate_scene(5, "different-floor", "toilet", kb)
    assert s.all_targets_off_floor()
    assert s.target_instances() == []
    assert any(o.label == "toilet" and o.floor_id == 1 for o in s.objects)


def test_target_absent_family(kb):
    s = generate_scene(2, "target-absent", "toilet", kb)
    assert not any(o.label == "toilet" for o in s.objects)


def test_apartment_starts_free_targets_reachable(kb):
    for seed in range(12):
        s = generate_scene(seed, "apartment", "toilet", kb)
        g = s.rasterize(0.1)
        pg = PlanningGrid(g, NavParams(inflation=0.12))
        start_rc = g.world_to_cell(s.start.xy)
        assert not pg.blocked[start_rc], f"seed {seed} start blocked"
        dist, _ = dijkstra_field(pg, s.start.xy)
        ok = False
        for obj in s.target_instances():
            for p in obj.polygon.perimeter_points(0.15):
                for dx, dy in ((0.3, 0), (-0.3, 0), (0, 0.3), (0, -0.3)):
                    rc = g.world_to_cell((p[0] + dx, p[1] + dy))
                    if g.in_bounds(*rc) and np.isfinite(dist[rc]):
                        ok = True
        assert ok, f"seed {seed} target unreachable"


def test_semantic_rich_places_target_in_its_room(kb):
    s = generate_scene(4, "semantic-rich", "toilet", kb)
    tgt = s.target_instances()[0]
    room = next(r for r in s.rooms if r.id == tgt.room_id)
    assert room.kind == "bathroom"


def test_semantic_flat_has_no_matching_room(kb):
    s = generate_scene(4, "semantic-flat", "toilet", kb)
    assert all(r.kind != "bathroom" for r in s.rooms)


def test_collision_trap_has_narrow_doors(kb):
    s = generate_scene(1, "collision-trap", "toilet", kb)
    assert any(o.label == "pillar" for o in s.objects)


def test_maze_target_far_from_start(kb):
    s = generate_scene(0, "corridor-maze", "toilet", kb)
    d = np.linalg.norm(s.target_instances()[0].polygon.centroid - s.start.xy)
    assert d > 4.0


def test_scene_round_trip(tmp_path, kb):
    s = generate_scene(7, "apartment", "bed", kb)
    path = tmp_path / "scene.json"
    s.save(path)
    loaded = Scene.load(path)
    assert json.dumps(loaded.to_json(), sort_keys=True) == \
        json.dumps(s.to_json(), sort_keys=True)


def test_unknown_family_rejected(kb):
    with pytest.raises(ValueError):
        generate_scene(0, "castle", "toilet", kb)


def test_rasterize_marks_objects_occupied(kb):
    s = generate_scene(3, "apartment", "toilet", kb)
    g = s.rasterize()
    for obj in s.target_instances():
        rc = g.world_to_cell(obj.polygon.centroid)
        assert g.state[rc] == 1
