"""Target-centric object clusters and multi-frame confidence fusion.

Each physical object hypothesis is one cluster holding a per-label slot of
(points, confidence, accumulated volume). Detections fuse in weighted by
their downsampled point count; clusters seen but not re-detected take a
zero-confidence penalty weighted by how much of them was re-observed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .grid import OCCUPIED, GridMap

DBSCAN_EPS = 0.2
DBSCAN_MIN_PTS = 4


class FusionVariant(Enum):
    FULL = "full"            # volume-weighted running mean
    OVERWRITE = "overwrite"  # latest detection wins (no-fusion ablation)
    MAX = "max"              # max-confidence fusion ablation


@dataclass
class FusionParams:
    r_down: float = 0.05          # downsample pitch, meters
    c_th: float = 0.5             # reliable-target threshold, from knowledge
    variant: FusionVariant = FusionVariant.FULL
    observation_penalty: bool = True


@dataclass
class DetectionInstance:
    points: np.ndarray            # (N, 2) world coordinates
    confidence: float
    label: str


@dataclass
class LabelEntry:
    points: np.ndarray = field(default_factory=lambda: np.empty((0, 2)))
    confidence: float = 0.0
    volume: float = 0.0           # accumulated detection volume n

    @property
    def empty(self) -> bool:
        return self.volume <= 0.0


@dataclass
class ObjectCluster:
    id: int
    labels: list[str]                       # the object list, target first
    footprint: set = field(default_factory=set)   # occupied cells (row, col)
    entries: dict[str, LabelEntry] = field(default_factory=dict)
    observations: int = 0                   # fusion events (detections + penalties)

    def __post_init__(self):
        for l in self.labels:
            self.entries.setdefault(l, LabelEntry())

    def entry(self, label: str) -> LabelEntry:
        return self.entries[label]

    def centroid(self, grid: GridMap) -> np.ndarray:
        rc = np.array(sorted(self.footprint), dtype=np.int64)
        return grid.cell_centers(rc).mean(axis=0)

    def all_points(self) -> np.ndarray:
        pts = [e.points for e in self.entries.values() if len(e.points)]
        if not pts:
            return np.empty((0, 2))
        return np.vstack(pts)


def dbscan_largest(points: np.ndarray, eps: float = DBSCAN_EPS,
                   min_pts: int = DBSCAN_MIN_PTS) -> np.ndarray:
    """Largest DBSCAN cluster of a 2D point set (core + border points).

    Brute-force neighborhoods; input order fixes the cluster sweep, so the
    result is deterministic.
    """
    n = len(points)
    if n == 0:
        return points
    d2 = ((points[:, None, :] - points[None, :, :]) ** 2).sum(-1)
    neigh = d2 <= eps * eps
    counts = neigh.sum(axis=1)
    core = counts >= min_pts
    labels = np.full(n, -1, dtype=np.int64)
    cluster = 0
    for i in range(n):
        if labels[i] != -1 or not core[i]:
            continue
        stack = [i]
        labels[i] = cluster
        while stack:
            j = stack.pop()
            if not core[j]:
                continue
            for k in np.nonzero(neigh[j])[0]:
                if labels[k] == -1:
                    labels[k] = cluster
                    stack.append(int(k))
        cluster += 1
    if cluster == 0:
        return np.empty((0, 2))
    sizes = [(labels == c).sum() for c in range(cluster)]
    best = int(np.argmax(sizes))
    return points[labels == best]


def preprocess_detection(raw_points: np.ndarray, confidence: float, label: str,
                         grid: GridMap, params: FusionParams) -> DetectionInstance | None:
    """Denoise a raw detection and keep only points over occupied cells.

    Returns None (reject) when nothing survives; the caller skips fusion.
    """
    pts = np.asarray(raw_points, dtype=float).reshape(-1, 2)
    if len(pts) == 0:
        return None
    pts = dbscan_largest(pts)
    if len(pts) == 0:
        return None
    rc = grid.cells_of(pts)
    ok = (rc[:, 0] >= 0) & (rc[:, 0] < grid.height) & \
         (rc[:, 1] >= 0) & (rc[:, 1] < grid.width)
    rc, pts = rc[ok], pts[ok]
    if len(pts) == 0:
        return None
    occ = grid.state[rc[:, 0], rc[:, 1]] == OCCUPIED
    pts = pts[occ]
    if len(pts) == 0:
        return None
    return DetectionInstance(pts, float(confidence), label)


def downsample(points: np.ndarray, r_down: float) -> tuple[np.ndarray, int]:
    """Grid downsampling at pitch r_down, one cell-center representative per
    occupied cell. Returns (points, volume = point count)."""
    if r_down <= 0:
        raise ValueError("r_down must be positive")
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) == 0:
        return pts, 0
    cells = np.floor(pts / r_down).astype(np.int64)
    uniq = np.unique(cells, axis=0)
    order = np.lexsort((uniq[:, 1], uniq[:, 0]))
    uniq = uniq[order]
    reps = (uniq + 0.5) * r_down
    return reps, len(reps)


def detection_cells(det: DetectionInstance, grid: GridMap) -> set:
    rc = grid.cells_of(det.points)
    return {(int(r), int(c)) for r, c in rc}


def associate(clusters: list[ObjectCluster], det: DetectionInstance,
              grid: GridMap) -> ObjectCluster | None:
    """Cluster whose footprint overlaps the detection the most, or None.

    Ties resolve to the lowest cluster id; zero overlap means a new cluster
    should be created.
    """
    cells = detection_cells(det, grid)
    best = None
    best_overlap = 0
    for cl in sorted(clusters, key=lambda c: c.id):
        ov = len(cells & cl.footprint)
        if ov > best_overlap:
            best = cl
            best_overlap = ov
    return best


def fuse_values(c_last: float, n_last: float, c_det: float, v_det: float,
                variant: FusionVariant = FusionVariant.FULL) -> tuple[float, float]:
    """Volume-weighted confidence update.

    FULL keeps the running mean weighted by accumulated volume; OVERWRITE
    replaces it wholesale; MAX keeps the highest confidence seen.
    """
    if variant == FusionVariant.OVERWRITE:
        return float(c_det), float(v_det)
    n_new = n_last + v_det
    if variant == FusionVariant.MAX:
        return max(c_last, c_det) if n_last > 0 else float(c_det), n_new
    if n_new <= 0:
        return c_last, n_last
    c_new = (n_last / n_new) * c_last + (v_det / n_new) * c_det
    return c_new, n_new


def fuse_detection(cluster: ObjectCluster, det: DetectionInstance,
                   params: FusionParams) -> ObjectCluster:
    """Fuse one detection into the entry for its label; other entries and
    the merged, re-downsampled point set update alongside."""
    if det.label not in cluster.entries:
        raise KeyError(f"label {det.label!r} not in the cluster object list")
    entry = cluster.entry(det.label)
    _, v_det = downsample(det.points, params.r_down)
    c_new, n_new = fuse_values(entry.confidence, entry.volume,
                               det.confidence, v_det, params.variant)
    merged = np.vstack([entry.points, det.points]) if len(entry.points) \
        else det.points
    entry.points, _ = downsample(merged, params.r_down)
    entry.confidence = c_new
    entry.volume = n_new
    return cluster


def penalize_missed(cluster: ObjectCluster, visible_points: np.ndarray,
                    params: FusionParams) -> ObjectCluster:
    """Zero-confidence fusion against every nonempty entry, weighted by how
    many stored points were re-observed in the current depth cloud."""
    if not params.observation_penalty or params.variant == FusionVariant.OVERWRITE:
        return cluster
    vis = np.asarray(visible_points, dtype=float).reshape(-1, 2)
    for label in cluster.labels:
        entry = cluster.entry(label)
        if entry.empty or len(entry.points) == 0:
            continue
        if len(vis) == 0:
            continue
        d2 = ((entry.points[:, None, :] - vis[None, :, :]) ** 2).sum(-1)
        v_seen = int((d2.min(axis=1) <= params.r_down ** 2).sum())
        if v_seen == 0:
            continue
        c_new, n_new = fuse_values(entry.confidence, entry.volume,
                                   0.0, v_seen, params.variant)
        entry.confidence = c_new
        entry.volume = n_new
    return cluster


def best_label(cluster: ObjectCluster) -> str | None:
    """Label maximizing confidence * volume; ties prefer the target label
    (index 0 of the object list), then the lowest list index."""
    best = None
    best_score = -1.0
    for label in cluster.labels:
        e = cluster.entry(label)
        if e.empty:
            continue
        score = e.confidence * e.volume
        if score > best_score + 1e-12:
            best = label
            best_score = score
    return best


def classify_targets(clusters: list[ObjectCluster], target: str,
                     c_th: float) -> tuple[list[ObjectCluster], list[ObjectCluster]]:
    """Split target-labeled clusters into reliable / suspected by c_th.

    Both lists come back sorted by target confidence, descending.
    """
    reliable, suspected = [], []
    for cl in clusters:
        if best_label(cl) != target:
            continue
        c = cl.entry(target).confidence
        if c >= c_th:
            reliable.append(cl)
        else:
            suspected.append(cl)
    key = lambda cl: (-cl.entry(target).confidence, cl.id)
    reliable.sort(key=key)
    suspected.sort(key=key)
    return reliable, suspected


class ClusterStore:
    """Per-episode collection of object clusters with frame-level updates."""

    def __init__(self, labels: list[str], params: FusionParams):
        self.labels = list(labels)
        self.params = params
        self.clusters: list[ObjectCluster] = []
        self._next_id = 0

    def ingest(self, det: DetectionInstance, grid: GridMap) -> ObjectCluster:
        """Associate + fuse one preprocessed detection; returns the cluster."""
        cells = detection_cells(det, grid)
        cl = associate(self.clusters, det, grid)
        if cl is None:
            cl = ObjectCluster(self._next_id, self.labels)
            self._next_id += 1
            self.clusters.append(cl)
        fuse_detection(cl, det, self.params)
        cl.footprint |= cells
        cl.observations += 1
        return cl

    def penalize_unseen(self, fused_ids: set, in_view_ids: set,
                        visible_points: np.ndarray) -> None:
        for cl in self.clusters:
            if cl.id in fused_ids or cl.id not in in_view_ids:
                continue
            penalize_missed(cl, visible_points, self.params)
            cl.observations += 1
