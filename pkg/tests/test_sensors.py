import math

import numpy as np
import pytest

from semnav.geometry import Pose, rect_polygon, segments_array
from semnav.knowledge import load_profile
from semnav.runner import crafted_scene
from semnav.scene import Room, Scene, SceneObject, generate_scene
from semnav.sensors import (
    DetectorModel, sense_depth, sense_detections, sense_semantic_score,
)


@pytest.fixture(scope="module")
def kb():
    return load_profile("hm3d")


def box_scene(target="toilet", with_target=True):
    walls = segments_array([(0, 0, 8, 0), (8, 0, 8, 8), (8, 8, 0, 8),
                            (0, 8, 0, 0)])
    rooms = [Room(0, "bathroom", (0, 0, 8, 8))]
    objects = []
    if with_target:
        objects.append(SceneObject(target, rect_polygon(5.0, 4.0, 0.6, 0.6), 0))
    return Scene("box", "apartment", 0, (0, 0, 8, 8), walls, rooms, objects,
                 Pose(2.0, 4.0, 0.0), target)


def rng():
    return np.random.default_rng(0)


# ------------------------------------------------------------------ depth

def test_center_beam_range_to_wall():
    scene = box_scene(with_target=False)
    pose = Pose(6.0, 4.0, 0.0)   # facing the east wall 2 m away
    scan = sense_depth(scene, pose, rng(), noise=0.0)
    center = np.argmin(np.abs(scan.angles))
    # the even beam count has no ray exactly on-axis; cos() skew is tiny
    assert scan.ranges[center] == pytest.approx(2.0, abs=1e-4)
    assert scan.hits[center]


def test_all_miss_when_nothing_in_range():
    walls = segments_array([(0, 0, 40, 0), (40, 0, 40, 40), (40, 40, 0, 40),
                            (0, 40, 0, 0)])
    scene = Scene("big", "apartment", 0, (0, 0, 40, 40), walls,
                  [Room(0, "hallway", (0, 0, 40, 40))], [],
                  Pose(20, 20, 0), "toilet")
    scan = sense_depth(scene, Pose(20, 20, 0), rng(), noise=0.0)
    assert not scan.hits.any()
    assert np.all(scan.ranges == scan.max_range)


def test_noise_bounded_at_five_sigma():
    scene = box_scene(with_target=False)
    pose = Pose(6.0, 4.0, 0.0)
    g = np.random.default_rng(123)
    worst = 0.0
    clean = sense_depth(scene, pose, rng(), noise=0.0)
    for _ in range(200):   # 200 scans x 180 beams = 36k draws
        noisy = sense_depth(scene, pose, g, noise=0.01)
        if len(noisy.ranges) == len(clean.ranges):
            worst = max(worst, float(np.abs(noisy.ranges - clean.ranges).max()))
    assert worst <= 5 * 0.01


def test_beam_angles_strictly_increasing():
    scene = box_scene()
    scan = sense_depth(scene, Pose(2.0, 4.0, 0.0), rng())
    assert np.all(np.diff(scan.angles) > 0)


# ------------------------------------------------------------- detections

def test_oracle_detects_visible_target_exactly_once():
    scene = box_scene()
    pose = Pose(2.0, 4.0, 0.0)   # toilet 3 m ahead
    dets = sense_detections(scene, pose, DetectorModel.oracle(), rng(),
                            ["toilet"])
    assert len(dets) == 1
    assert dets[0].label == "toilet"
    assert dets[0].confidence == pytest.approx(0.85)


def test_object_behind_wall_never_detected():
    walls = segments_array([(0, 0, 8, 0), (8, 0, 8, 8), (8, 8, 0, 8),
                            (0, 8, 0, 0), (3.5, 2.0, 3.5, 6.0)])
    scene = Scene("walled", "apartment", 0, (0, 0, 8, 8), walls,
                  [Room(0, "bathroom", (0, 0, 8, 8))],
                  [SceneObject("toilet", rect_polygon(5.0, 4.0, 0.6, 0.6), 0)],
                  Pose(2.0, 4.0, 0.0), "toilet")
    dets = sense_detections(scene, Pose(2.0, 4.0, 0.0),
                            DetectorModel.oracle(), rng(), ["toilet"])
    assert dets == []


def test_out_of_fov_not_detected():
    scene = box_scene()
    pose = Pose(2.0, 4.0, math.pi)   # facing away
    dets = sense_detections(scene, pose, DetectorModel.oracle(), rng(),
                            ["toilet"])
    assert dets == []


def test_confusion_rate_monte_carlo(kb):
    scene = box_scene(target="chair")
    scene.objects[0] = SceneObject("chair", rect_polygon(5.0, 4.0, 0.6, 0.6), 0)
    model = DetectorModel(tp_rate={"chair": 0.0},
                          confusion={"chair": {"toilet": 0.3}})
    g = np.random.default_rng(7)
    hits = 0
    trials = 4000
    for _ in range(trials):
        dets = sense_detections(scene, Pose(2.0, 4.0, 0.0), model, g,
                                ["toilet", "chair"])
        hits += sum(1 for d in dets if d.label == "toilet")
    assert hits / trials == pytest.approx(0.3, abs=0.025)


def test_detection_points_lie_on_footprint():
    scene = box_scene()
    dets = sense_detections(scene, Pose(2.0, 4.0, 0.0),
                            DetectorModel.oracle(), rng(), ["toilet"])
    obj = scene.objects[0]
    for p in dets[0].points:
        assert obj.polygon.distance(p) < 0.05


def test_false_positive_blobs_flagged(kb):
    scene = box_scene(with_target=False)
    model = DetectorModel(fp_rate=1.0, conf_false_spread=0.0)
    g = np.random.default_rng(3)
    pose = Pose(5.0, 4.0, 0.0)   # east wall inside sensing range
    scan = sense_depth(scene, pose, g, noise=0.0)
    assert len(scan.hit_points()) > 0
    dets = sense_detections(scene, pose, model, g,
                            ["toilet", "chair"], scan=scan)
    assert len(dets) == 1 and dets[0].synthetic
    assert dets[0].label in ("toilet", "chair")


def test_probability_validation():
    with pytest.raises(ValueError):
        DetectorModel(tp_rate={"chair": 0.9},
                      confusion={"chair": {"toilet": 0.3}}).validate()


# ------------------------------------------------------------ score model

def test_wrong_room_and_unseen_target_scores_base(kb):
    # no matching room in view and the target out of sight: base only
    walls = segments_array([(0, 0, 8, 0), (8, 0, 8, 8), (8, 8, 0, 8),
                            (0, 8, 0, 0), (4.0, 0, 4.0, 8)])
    scene = Scene("split", "apartment", 0, (0, 0, 8, 8), walls,
                  [Room(0, "storage", (0, 0, 4, 8)),
                   Room(1, "storage", (4, 0, 8, 8))],
                  [SceneObject("toilet", rect_polygon(6.0, 4.0, 0.6, 0.6), 1)],
                  Pose(2.0, 4.0, math.pi), "toilet")
    frame = sense_semantic_score(scene, scene.start, "toilet", kb,
                                 np.random.default_rng(0), noise=0.0)
    assert frame.score == pytest.approx(0.2, abs=1e-9)


def test_proximity_gated_on_line_of_sight(kb):
    scene = box_scene()
    pose_facing = Pose(3.0, 4.0, 0.0)
    pose_away = Pose(3.0, 4.0, math.pi)
    near = sense_semantic_score(scene, pose_facing, "toilet", kb,
                                np.random.default_rng(0), noise=0.0)
    away = sense_semantic_score(scene, pose_away, "toilet", kb,
                                np.random.default_rng(0), noise=0.0)
    assert near.score > away.score + 0.1   # visible target raises the score


def test_facing_target_room_capped_region(kb):
    scene = box_scene()    # one big bathroom with the toilet
    pose = Pose(3.5, 4.0, 0.0)  # close to the target, room still in view
    frame = sense_semantic_score(scene, pose, "toilet", kb,
                                 np.random.default_rng(0), noise=0.0)
    d = scene.target_distance(pose.xy)
    want = 0.2 + 0.4 + 0.3 * math.exp(-d / 4.0)
    assert frame.score == pytest.approx(want, abs=1e-6)
    assert frame.score > 0.8


def test_everywhere_room_suppresses_bonus(kb):
    # chair has room "everywhere": score must ignore room identity
    scene = box_scene(target="chair")
    scene.objects[0] = SceneObject("chair", rect_polygon(5.0, 4.0, 0.6, 0.6), 0)
    pose = Pose(2.0, 4.0, 0.0)
    frame = sense_semantic_score(scene, pose, "chair", kb,
                                 np.random.default_rng(0), noise=0.0)
    d = scene.target_distance(pose.xy)
    assert frame.score == pytest.approx(0.2 + 0.3 * math.exp(-d / 4.0),
                                        abs=1e-6)


def test_score_determinism(kb):
    scene = crafted_scene("trivial")
    a = sense_semantic_score(scene, scene.start, "toilet", kb,
                             np.random.default_rng(5))
    b = sense_semantic_score(scene, scene.start, "toilet", kb,
                             np.random.default_rng(5))
    assert a.score == b.score
