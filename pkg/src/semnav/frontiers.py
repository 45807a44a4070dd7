"""Frontier detection and clustering on the occupancy grid.

A frontier cell is a free cell 4-adjacent to at least one unknown cell.
Connected components (8-connectivity) are recursively split along their
first principal axis until every cluster spans at most `max_extent`
meters, and each final cluster is summarized by its center.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .grid import FREE, UNKNOWN, GridMap

MAX_EXTENT = 2.0        # meters, split threshold along the first principal axis
MIN_CLUSTER_CELLS = 3   # smaller clusters are sensor-noise artifacts

_EIGHT = np.ones((3, 3), dtype=int)


@dataclass
class FrontierCluster:
    id: int
    cells: np.ndarray               # (N, 2) grid cells (row, col)
    center: np.ndarray              # world coordinates, mean of cell centers
    score: float = 0.0              # semantic score, attached by the caller


def frontier_mask(grid: GridMap) -> np.ndarray:
    """Boolean mask of frontier cells over the whole grid."""
    free = grid.state == FREE
    unk = grid.state == UNKNOWN
    adj_unknown = np.zeros_like(unk)
    adj_unknown[1:, :] |= unk[:-1, :]
    adj_unknown[:-1, :] |= unk[1:, :]
    adj_unknown[:, 1:] |= unk[:, :-1]
    adj_unknown[:, :-1] |= unk[:, 1:]
    return free & adj_unknown


def detect_frontier_cells(grid: GridMap, changed) -> set[tuple[int, int]]:
    """Frontier cells inside the changed rectangle, dilated by one cell.

    `changed` is (row0, col0, row1, col1), half-open. The caller keeps
    previously known frontier cells outside the region.
    """
    r0, c0, r1, c1 = changed
    r0 = max(0, r0 - 1)
    c0 = max(0, c0 - 1)
    r1 = min(grid.height, r1 + 1)
    c1 = min(grid.width, c1 + 1)
    if r0 >= r1 or c0 >= c1:
        return set()
    mask = frontier_mask(grid)[r0:r1, c0:c1]
    rc = np.argwhere(mask)
    return {(int(r + r0), int(c + c0)) for r, c in rc}


def _principal_axis(xy: np.ndarray) -> np.ndarray:
    centered = xy - xy.mean(axis=0)
    cov = centered.T @ centered / len(xy)
    vals, vecs = np.linalg.eigh(cov)
    return vecs[:, int(np.argmax(vals))]


def _split_recursive(cells: np.ndarray, xy: np.ndarray, max_extent: float,
                     out: list) -> None:
    axis = _principal_axis(xy)
    proj = xy @ axis
    if proj.max() - proj.min() <= max_extent:
        out.append(cells)
        return
    mid = proj.mean()
    left = proj <= mid
    right = ~left
    if not left.any() or not right.any():
        out.append(cells)
        return
    _split_recursive(cells[left], xy[left], max_extent, out)
    _split_recursive(cells[right], xy[right], max_extent, out)


def cluster_frontiers(cells, grid: GridMap, max_extent: float = MAX_EXTENT,
                      min_cells: int = MIN_CLUSTER_CELLS,
                      start_id: int = 0) -> list[FrontierCluster]:
    """Cluster frontier cells: 8-connected components, PCA-split to max_extent.

    Ids are assigned sequentially from start_id in a deterministic order
    (components sorted by their minimum cell).
    """
    cell_arr = np.array(sorted(cells), dtype=np.int64).reshape(-1, 2)
    if len(cell_arr) == 0:
        return []
    mask = np.zeros((grid.height, grid.width), dtype=bool)
    mask[cell_arr[:, 0], cell_arr[:, 1]] = True
    labels, n = ndimage.label(mask, structure=_EIGHT)
    clusters: list[FrontierCluster] = []
    next_id = start_id
    comps = []
    for k in range(1, n + 1):
        comp = np.argwhere(labels == k)
        comps.append(comp[np.lexsort((comp[:, 1], comp[:, 0]))])
    comps.sort(key=lambda c: (int(c[0, 0]), int(c[0, 1])))
    for comp in comps:
        pieces: list[np.ndarray] = []
        _split_recursive(comp, grid.cell_centers(comp), max_extent, pieces)
        pieces.sort(key=lambda p: (int(p[:, 0].min()), int(p[:, 1].min())))
        for piece in pieces:
            if len(piece) < min_cells:
                continue
            center = grid.cell_centers(piece).mean(axis=0)
            clusters.append(FrontierCluster(next_id, piece, center))
            next_id += 1
    return clusters


def prune_dead_frontiers(clusters: list[FrontierCluster],
                         grid: GridMap) -> list[FrontierCluster]:
    """Drop clusters with any cell that no longer satisfies the predicate.

    Survivors are returned unchanged (same ids, same cells).
    """
    mask = frontier_mask(grid)
    keep = []
    for cl in clusters:
        if mask[cl.cells[:, 0], cl.cells[:, 1]].all():
            keep.append(cl)
    return keep


class FrontierTracker:
    """Incremental frontier bookkeeping with stable cluster ids.

    On each map change the clusters touching the dirty region are dissolved
    and re-clustered together with newly detected cells; untouched clusters
    keep their id. The resulting cluster set always equals a full-map
    recomputation (up to ids).
    """

    def __init__(self, max_extent: float = MAX_EXTENT,
                 min_cells: int = MIN_CLUSTER_CELLS):
        self.max_extent = max_extent
        self.min_cells = min_cells
        self.clusters: list[FrontierCluster] = []
        self._loose_cells: set[tuple[int, int]] = set()
        self._next_id = 0

    def update(self, grid: GridMap, changed) -> None:
        if changed is None:
            return
        mask = frontier_mask(grid)
        labels, _ = ndimage.label(mask, structure=_EIGHT)

        # components touched by the change: anything qualifying in the dilated
        # rectangle, plus remnants of clusters that lost a cell, plus loose
        # cells carried over from sub-minimum pieces
        affected: set[int] = set()
        for r, c in detect_frontier_cells(grid, changed):
            affected.add(int(labels[r, c]))
        for cell in self._loose_cells:
            if mask[cell]:
                affected.add(int(labels[cell]))
        pending: list[FrontierCluster] = []
        for cl in self.clusters:
            alive = mask[cl.cells[:, 0], cl.cells[:, 1]]
            if not alive.all():
                for r, c in cl.cells[alive]:
                    affected.add(int(labels[r, c]))
            else:
                pending.append(cl)
        affected.discard(0)

        # dissolve alive clusters whose component is affected; a dissolving
        # cluster drags all components it spans into the affected set
        comp_sets = [set(int(k) for k in
                         np.unique(labels[cl.cells[:, 0], cl.cells[:, 1]]))
                     for cl in pending]
        dissolved = [False] * len(pending)
        grew = True
        while grew:
            grew = False
            for i, cl in enumerate(pending):
                if dissolved[i]:
                    continue
                if comp_sets[i] & affected:
                    dissolved[i] = True
                    if not comp_sets[i] <= affected:
                        affected |= comp_sets[i]
                        grew = True
        survivors = [cl for i, cl in enumerate(pending) if not dissolved[i]]

        if affected:
            sel = np.isin(labels, list(affected))
            pool = {(int(r), int(c)) for r, c in np.argwhere(sel)}
        else:
            pool = set()

        new_clusters = cluster_frontiers(pool, grid, self.max_extent,
                                         self.min_cells, start_id=self._next_id)
        if new_clusters:
            self._next_id = max(cl.id for cl in new_clusters) + 1
        clustered = set()
        for cl in new_clusters:
            clustered.update((int(r), int(c)) for r, c in cl.cells)
        old_loose = {c for c in self._loose_cells
                     if mask[c] and c not in pool}
        self._loose_cells = old_loose | {c for c in pool if c not in clustered}

        self.clusters = survivors + new_clusters
        self.clusters.sort(key=lambda cl: cl.id)

    def cells(self) -> set[tuple[int, int]]:
        out = set()
        for cl in self.clusters:
            out.update((int(r), int(c)) for r, c in cl.cells)
        return out
