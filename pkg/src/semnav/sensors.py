"""Synthetic perception: depth scans, the noisy detector, and the scene
relevance scorer.

All stochastic draws go through explicitly passed generators so an episode
replays bit-for-bit from its seed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Pose, rays_segments_hit, wrap_angle
from .grid import Scan
from .knowledge import KnowledgeBase
from .scene import Scene
from .semantic_map import FramedScore

DEFAULT_FOV = math.pi / 2
DEFAULT_BEAMS = 180
DEFAULT_RANGE = 5.0

SCORE_BASE = 0.2
SCORE_ROOM_BONUS = 0.4
SCORE_PROX_BONUS = 0.3
SCORE_PROX_TAU = 4.0
SCORE_NOISE = 0.03


@dataclass
class RawDetection:
    points: np.ndarray
    confidence: float
    label: str
    synthetic: bool = False      # true for injected false positives


@dataclass
class DetectorModel:
    """Per-label detection behavior over the object list.

    tp_rate: probability a visible object is reported under its own label.
    confusion: per true label, {reported label: probability}; rows with the
    tp_rate must sum to at most 1, the rest is a miss.
    """

    tp_rate: dict = field(default_factory=dict)
    confusion: dict = field(default_factory=dict)
    default_tp: float = 1.0
    fp_rate: float = 0.0
    conf_true_mean: float = 0.85
    conf_true_spread: float = 0.0
    conf_false_mean: float = 0.55
    conf_false_spread: float = 0.0
    point_noise: float = 0.0
    fov: float = DEFAULT_FOV
    max_range: float = DEFAULT_RANGE
    min_visible_points: int = 3
    fp_target_bias: float = 0.7   # fraction of false positives labeled as target

    def tp(self, label: str) -> float:
        return self.tp_rate.get(label, self.default_tp)

    def validate(self) -> None:
        for label, row in self.confusion.items():
            total = self.tp(label) + sum(row.values())
            if total > 1.0 + 1e-9:
                raise ValueError(f"detection probabilities for {label!r} "
                                 f"sum to {total} > 1")

    @classmethod
    def oracle(cls) -> "DetectorModel":
        return cls()

    @classmethod
    def noisy(cls, kb: KnowledgeBase, target: str, fp_rate: float = 0.10,
              confusion_rate: float = 0.20) -> "DetectorModel":
        """Misdetection model seeded by the knowledge base's similar list:
        every similar object confuses into the target at confusion_rate."""
        entry = kb.get(target)
        confusion = {s: {target: confusion_rate} for s in entry.similar}
        tp = {s: min(1.0 - confusion_rate, 0.75) for s in entry.similar}
        tp[target] = 0.9
        model = cls(tp_rate=tp, confusion=confusion, default_tp=0.75,
                    fp_rate=fp_rate, conf_true_spread=0.08,
                    conf_false_spread=0.12, point_noise=0.005)
        model.validate()
        return model

    @classmethod
    def blind_to(cls, label: str) -> "DetectorModel":
        return cls(tp_rate={label: 0.0})


def sense_depth(scene: Scene, pose: Pose, rng, n_beams: int = DEFAULT_BEAMS,
                fov: float = DEFAULT_FOV, max_range: float = DEFAULT_RANGE,
                noise: float = 0.01, outlier_radius: float = 0.12,
                outlier_min_neighbors: int = 2) -> Scan:
    """Planar depth scan against the scene segments with seeded range noise
    and radius-outlier removal of the hit cloud."""
    segs = scene.obstacle_segments()
    offsets = np.linspace(-fov / 2, fov / 2, n_beams)
    dists = rays_segments_hit(pose.xy, pose.yaw + offsets, segs, max_range)
    hits = dists < max_range - 1e-9
    if noise > 0 and hits.any():
        dists = dists.copy()
        dists[hits] = np.clip(dists[hits] + rng.normal(0.0, noise, hits.sum()),
                              0.0, max_range)

    keep = np.ones(n_beams, dtype=bool)
    if hits.sum() >= 3:
        ang = pose.yaw + offsets[hits]
        r = dists[hits]
        pts = np.column_stack([pose.x + r * np.cos(ang),
                               pose.y + r * np.sin(ang)])
        d2 = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1)
        neigh = (d2 <= outlier_radius ** 2).sum(axis=1) - 1
        bad = neigh < outlier_min_neighbors
        if bad.any():
            keep[np.nonzero(hits)[0][bad]] = False
    return Scan(origin=pose, angles=offsets[keep], ranges=dists[keep],
                hits=hits[keep], max_range=max_range)


def _visible_boundary(scene: Scene, pose: Pose, obj, fov: float,
                      max_range: float, segs: np.ndarray,
                      spacing: float = 0.06) -> np.ndarray:
    """Boundary samples of the object's footprint visible from the pose."""
    pts = obj.polygon.perimeter_points(spacing)
    rel = pts - pose.xy
    dist = np.linalg.norm(rel, axis=1)
    bearing = np.arctan2(rel[:, 1], rel[:, 0]) - pose.yaw
    bearing = (bearing + math.pi) % (2 * math.pi) - math.pi
    ok = (dist <= max_range) & (np.abs(bearing) <= fov / 2) & (dist > 1e-6)
    if not ok.any():
        return np.empty((0, 2))
    pts, rel, dist = pts[ok], rel[ok], dist[ok]
    angles = np.arctan2(rel[:, 1], rel[:, 0])
    hit = rays_segments_hit(pose.xy, angles, segs, max_range + 1.0)
    visible = dist <= hit + 1e-6
    return pts[visible]


def sense_detections(scene: Scene, pose: Pose, detector: DetectorModel,
                     rng, labels: list[str], scan: Scan | None = None) -> list[RawDetection]:
    """Per-frame detections of visible objects plus synthetic false positives.

    Draw order is fixed (objects in scene order, then the false-positive
    draw), so results replay deterministically for a given generator state.
    """
    segs = scene.obstacle_segments()
    out: list[RawDetection] = []
    label_set = set(labels)
    for obj in scene.objects:
        if obj.floor_id != scene.floor_id:
            continue
        vis = _visible_boundary(scene, pose, obj, detector.fov,
                                detector.max_range, segs)
        if len(vis) < detector.min_visible_points:
            continue
        u = float(rng.random())
        emitted = None
        tp = detector.tp(obj.label)
        if u < tp:
            emitted = obj.label
            conf_mean, conf_spread = detector.conf_true_mean, detector.conf_true_spread
        else:
            acc = tp
            for rep_label, p in sorted(detector.confusion.get(obj.label, {}).items()):
                acc += p
                if u < acc:
                    emitted = rep_label
                    conf_mean, conf_spread = (detector.conf_false_mean,
                                              detector.conf_false_spread)
                    break
        conf = float(np.clip(rng.normal(conf_mean, conf_spread), 0.05, 0.99)) \
            if emitted is not None else 0.0
        pts = vis
        if detector.point_noise > 0:
            pts = vis + rng.normal(0.0, detector.point_noise, vis.shape)
        if emitted is not None and emitted in label_set:
            out.append(RawDetection(pts, conf, emitted))

    if detector.fp_rate > 0 and rng.random() < detector.fp_rate:
        anchor = None
        if scan is not None:
            hp = scan.hit_points()
            if len(hp):
                anchor = hp[int(rng.integers(len(hp)))]
        if anchor is not None:
            blob = anchor + rng.normal(0.0, 0.05, size=(int(rng.integers(8, 20)), 2))
            if rng.random() < detector.fp_target_bias or len(labels) == 1:
                fp_label = labels[0]
            else:
                fp_label = labels[1 + int(rng.integers(len(labels) - 1))]
            conf = float(np.clip(rng.normal(detector.conf_false_mean,
                                            detector.conf_false_spread),
                                 0.05, 0.99))
            out.append(RawDetection(blob, conf, fp_label, synthetic=True))
    return out


def sense_semantic_score(scene: Scene, pose: Pose, target: str,
                         kb: KnowledgeBase, rng, scan: Scan | None = None,
                         fov: float = DEFAULT_FOV,
                         max_range: float = DEFAULT_RANGE,
                         noise: float = SCORE_NOISE) -> FramedScore:
    """Scalar scene-target relevance for the current view.

    base + room bonus (dominant visible room matches the knowledge base's
    room, unless it is "everywhere") + proximity bonus + seeded noise.
    """
    entry = kb.get(target) if target in kb else None
    room_name = entry.room if entry is not None else "everywhere"

    bonus = 0.0
    if room_name != "everywhere":
        segs = scene.obstacle_segments()
        n_rays = 61
        offsets = np.linspace(-fov / 2, fov / 2, n_rays)
        dists = rays_segments_hit(pose.xy, pose.yaw + offsets, segs, max_range)
        weights = np.cos((offsets / (fov / 2)) * (math.pi / 2)) ** 2
        # each ray votes for the room it ends in: what the view actually
        # shows, so looking through a doorway counts the room behind it
        ang = pose.yaw + offsets
        end = np.maximum(dists - 0.25, 0.15)
        px = pose.x + np.cos(ang) * end
        py = pose.y + np.sin(ang) * end
        votes: dict[int, float] = {}
        for room in scene.rooms:
            x0, y0, x1, y1 = room.rect
            inside = (px >= x0) & (px <= x1) & (py >= y0) & (py <= y1)
            if inside.any():
                votes[room.id] = votes.get(room.id, 0.0) + \
                    float(weights[inside].sum())
        if votes:
            dominant = min(votes, key=lambda k: (-votes[k], k))
            kind = next(r.kind for r in scene.rooms if r.id == dominant)
            if kind == room_name:
                bonus = SCORE_ROOM_BONUS

    prox = 0.0
    targets = scene.target_instances(annotated_only=False)
    if targets:
        # proximity correlation only fires when the target is actually in
        # view: the scorer reacts to image content, not map geometry
        segs = scene.obstacle_segments()
        best = None
        for obj in targets:
            d = obj.polygon.distance(pose.xy)
            if best is not None and d >= best:
                continue
            vis = _visible_boundary(scene, pose, obj, fov, 3 * max_range, segs)
            if len(vis):
                best = d
        if best is not None:
            prox = scene.semantic_strength * SCORE_PROX_BONUS * \
                math.exp(-best / SCORE_PROX_TAU)

    eps = float(rng.normal(0.0, noise)) if noise > 0 else 0.0
    score = float(np.clip(SCORE_BASE + bonus + prox + eps, 0.0, 1.0))
    return FramedScore(pose, score, fov)
