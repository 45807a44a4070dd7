"""Debug exports: map snapshots, distance fields, score maps, clusters."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .frontiers import FrontierCluster
from .grid import FREE, OCCUPIED, EsdfMap, GridMap
from .semantic_map import SemanticScoreMap


def grid_to_pgm(grid: GridMap, path) -> None:
    """Grayscale snapshot (P5): free=255, unknown=127, occupied=0, with a
    sidecar JSON holding resolution and origin."""
    img = np.full((grid.height, grid.width), 127, dtype=np.uint8)
    img[grid.state == FREE] = 255
    img[grid.state == OCCUPIED] = 0
    img = img[::-1]   # row 0 at the top of the image
    p = Path(path)
    with p.open("wb") as fh:
        fh.write(f"P5\n{grid.width} {grid.height}\n255\n".encode())
        fh.write(img.tobytes())
    meta = {"resolution": grid.resolution,
            "origin": [float(grid.origin[0]), float(grid.origin[1])],
            "width": grid.width, "height": grid.height}
    p.with_suffix(".json").write_text(json.dumps(meta, indent=1),
                                      encoding="utf-8")


def esdf_to_csv(esdf: EsdfMap, path) -> None:
    """Distances in meters, one row per grid row."""
    np.savetxt(path, esdf.distance, fmt="%.4f", delimiter=",")


def score_map_to_csv(sem: SemanticScoreMap, path) -> None:
    """Interleaved (score, confidence) pairs per cell."""
    h, w = sem.score.shape
    out = np.empty((h, 2 * w))
    out[:, 0::2] = sem.score
    out[:, 1::2] = sem.conf
    np.savetxt(path, out, fmt="%.4f", delimiter=",")


def score_map_to_pgm(sem: SemanticScoreMap, path) -> None:
    """Score map normalized to grayscale for figures."""
    smax = sem.score.max()
    img = (sem.score / smax * 255).astype(np.uint8) if smax > 0 else \
        np.zeros_like(sem.score, dtype=np.uint8)
    img = img[::-1]
    with Path(path).open("wb") as fh:
        fh.write(f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode())
        fh.write(img.tobytes())


def clusters_to_geojson(clusters: list[FrontierCluster], grid: GridMap,
                        path) -> None:
    """Cluster cells as coordinate lists plus the center point."""
    features = []
    for cl in clusters:
        coords = [[round(float(x), 4), round(float(y), 4)]
                  for x, y in grid.cell_centers(cl.cells)]
        features.append({
            "type": "Feature",
            "properties": {"id": cl.id, "score": round(float(cl.score), 6)},
            "geometry": {"type": "MultiPoint", "coordinates": coords},
        })
        features.append({
            "type": "Feature",
            "properties": {"id": cl.id, "role": "center"},
            "geometry": {"type": "Point",
                         "coordinates": [round(float(cl.center[0]), 4),
                                         round(float(cl.center[1]), 4)]},
        })
    doc = {"type": "FeatureCollection", "features": features}
    Path(path).write_text(json.dumps(doc, indent=1), encoding="utf-8")
