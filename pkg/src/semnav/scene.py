"""Procedural 2D scenes: rooms, walls with doorways, objects, and episodes.

Scene families cover the benchmark suites: BSP apartments, serpentine
corridor mazes, semantically rich/flat variants, narrow-passage collision
traps, different-floor episodes, and target-absent rooms. Generation is
fully deterministic per (seed, family).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import Polygon, Pose, points_segments_distance, segments_array
from .grid import GridMap
from .knowledge import KnowledgeBase

SCENE_FORMAT = "semnav-scene/1"

FAMILIES = ("apartment", "corridor-maze", "semantic-rich", "semantic-flat",
            "collision-trap", "different-floor", "target-absent")

ROOM_KINDS = ("living room", "bedroom", "kitchen", "hallway", "storage")
DOOR_WIDTH = 1.0
NARROW_DOOR = 0.55
WALL_MARGIN = 0.05


@dataclass
class Room:
    id: int
    kind: str
    rect: tuple[float, float, float, float]    # x0, y0, x1, y1

    def contains(self, p) -> bool:
        x0, y0, x1, y1 = self.rect
        return x0 <= p[0] <= x1 and y0 <= p[1] <= y1

    @property
    def center(self):
        x0, y0, x1, y1 = self.rect
        return np.array([(x0 + x1) / 2, (y0 + y1) / 2])


@dataclass
class SceneObject:
    label: str
    polygon: Polygon
    room_id: int
    is_annotated: bool = True
    floor_id: int = 0


@dataclass
class Scene:
    name: str
    family: str
    seed: int
    bounds: tuple[float, float, float, float]
    walls: np.ndarray                  # (N, 4) segments
    rooms: list[Room]
    objects: list[SceneObject]
    start: Pose
    target: str
    floor_id: int = 0                  # the agent's floor
    # how strongly the scene's visuals correlate with target proximity;
    # semantically flat environments give the scorer surrogate little to
    # latch onto, which is what makes them flat
    semantic_strength: float = 1.0

    def obstacle_segments(self) -> np.ndarray:
        segs = [self.walls]
        for obj in self.objects:
            if obj.floor_id == self.floor_id:
                segs.append(obj.polygon.edges())
        return np.vstack([s for s in segs if len(s)])

    def target_instances(self, annotated_only: bool = True,
                         same_floor: bool = True) -> list[SceneObject]:
        out = []
        for obj in self.objects:
            if obj.label != self.target:
                continue
            if annotated_only and not obj.is_annotated:
                continue
            if same_floor and obj.floor_id != self.floor_id:
                continue
            out.append(obj)
        return out

    def target_distance(self, p) -> float:
        """Euclidean distance from a point to the nearest annotated target
        footprint on the agent's floor; inf when none exists."""
        inst = self.target_instances()
        if not inst:
            return math.inf
        return min(obj.polygon.distance(np.asarray(p, float)) for obj in inst)

    def all_targets_off_floor(self) -> bool:
        on = self.target_instances(annotated_only=False, same_floor=True)
        off = [o for o in self.objects
               if o.label == self.target and o.floor_id != self.floor_id]
        return not on and bool(off)

    def room_of(self, p) -> Room | None:
        for room in self.rooms:
            if room.contains(p):
                return room
        return None

    def grid_spec(self, resolution: float = 0.05,
                  margin: float = 0.6) -> dict:
        x0, y0, x1, y1 = self.bounds
        return {
            "width_m": (x1 - x0) + 2 * margin,
            "height_m": (y1 - y0) + 2 * margin,
            "resolution": resolution,
            "origin": (x0 - margin, y0 - margin),
        }

    def rasterize(self, resolution: float = 0.05) -> GridMap:
        """Fully observed ground-truth grid of the agent's floor."""
        spec = self.grid_spec(resolution)
        g = GridMap(**spec)
        g.set_free(np.argwhere(np.ones((g.height, g.width), dtype=bool)))
        occ = []
        step = resolution / 3.0
        for x1, y1, x2, y2 in self.obstacle_segments():
            ln = math.hypot(x2 - x1, y2 - y1)
            n = max(2, int(ln / step) + 1)
            ts = np.linspace(0.0, 1.0, n)
            pts = np.column_stack([x1 + ts * (x2 - x1), y1 + ts * (y2 - y1)])
            occ.append(pts)
        if occ:
            rc = g.cells_of(np.vstack(occ))
            ok = (rc[:, 0] >= 0) & (rc[:, 0] < g.height) & \
                 (rc[:, 1] >= 0) & (rc[:, 1] < g.width)
            g.set_occupied(rc[ok])
        for obj in self.objects:
            if obj.floor_id != self.floor_id:
                continue
            v = obj.polygon.vertices
            lo = g.world_to_cell(v.min(axis=0))
            hi = g.world_to_cell(v.max(axis=0))
            rr, cc = np.mgrid[max(0, lo[0]):min(g.height, hi[0] + 1),
                              max(0, lo[1]):min(g.width, hi[1] + 1)]
            if rr.size == 0:
                continue
            centers = np.column_stack([
                g.origin[0] + (cc.ravel() + 0.5) * resolution,
                g.origin[1] + (rr.ravel() + 0.5) * resolution,
            ])
            inside = obj.polygon.contains(centers)
            cells = np.column_stack([rr.ravel()[inside], cc.ravel()[inside]])
            if len(cells):
                g.set_occupied(cells)
        return g

    # -- serialization --------------------------------------------------

    def to_json(self) -> dict:
        return {
            "format": SCENE_FORMAT,
            "name": self.name,
            "family": self.family,
            "seed": self.seed,
            "bounds": list(self.bounds),
            "walls": [[round(v, 6) for v in seg] for seg in self.walls.tolist()],
            "rooms": [{"id": r.id, "kind": r.kind, "rect": list(r.rect)}
                      for r in self.rooms],
            "objects": [{
                "label": o.label,
                "vertices": [[round(v, 6) for v in p] for p in o.polygon.vertices.tolist()],
                "room_id": o.room_id,
                "is_annotated": o.is_annotated,
                "floor_id": o.floor_id,
            } for o in self.objects],
            "start": [self.start.x, self.start.y, self.start.yaw],
            "target": self.target,
            "floor_id": self.floor_id,
            "semantic_strength": self.semantic_strength,
        }

    @classmethod
    def from_json(cls, data: dict) -> "Scene":
        if data.get("format") != SCENE_FORMAT:
            raise ValueError(f"unsupported scene format {data.get('format')!r}")
        return cls(
            name=data["name"],
            family=data["family"],
            seed=data["seed"],
            bounds=tuple(data["bounds"]),
            walls=segments_array(data["walls"]),
            rooms=[Room(r["id"], r["kind"], tuple(r["rect"]))
                   for r in data["rooms"]],
            objects=[SceneObject(o["label"], Polygon(np.array(o["vertices"])),
                                 o["room_id"], o["is_annotated"], o["floor_id"])
                     for o in data["objects"]],
            start=Pose(*data["start"]),
            target=data["target"],
            floor_id=data["floor_id"],
            semantic_strength=data.get("semantic_strength", 1.0),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1, sort_keys=True),
                              encoding="utf-8")

    @classmethod
    def load(cls, path) -> "Scene":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


# ---------------------------------------------------------------- layout

def _bsp_split(rng, rects, min_side=2.6, max_rooms=7):
    """Recursively split the envelope into room rectangles."""
    leaves = list(rects)
    cuts = []
    while len(leaves) < max_rooms:
        # split the largest splittable leaf
        order = sorted(range(len(leaves)),
                       key=lambda i: -(leaves[i][2] - leaves[i][0])
                       * (leaves[i][3] - leaves[i][1]))
        done = True
        for idx in order:
            x0, y0, x1, y1 = leaves[idx]
            w, h = x1 - x0, y1 - y0
            if max(w, h) < 2 * min_side:
                continue
            vert = w >= h
            span = w if vert else h
            frac = rng.uniform(0.4, 0.6)
            pos = (x0 if vert else y0) + span * frac
            if vert:
                a = (x0, y0, pos, y1)
                b = (pos, y0, x1, y1)
                cuts.append(("v", pos, y0, y1))
            else:
                a = (x0, y0, x1, pos)
                b = (x0, pos, x1, y1)
                cuts.append(("h", pos, x0, x1))
            leaves[idx:idx + 1] = [a, b]
            done = False
            break
        if done:
            break
    return leaves, cuts


def _leaf_pairs_across(leaves, axis, pos, lo, hi):
    """Leaf index pairs adjacent across a cut, with their boundary overlap."""
    eps = 1e-6
    pairs = []
    for i, a in enumerate(leaves):
        for j, b in enumerate(leaves):
            if i >= j:
                continue
            if axis == "v":
                if abs(a[2] - pos) < eps and abs(b[0] - pos) < eps:
                    olo = max(a[1], b[1], lo)
                    ohi = min(a[3], b[3], hi)
                    if ohi - olo > 1.2:
                        pairs.append((i, j, olo, ohi))
                elif abs(b[2] - pos) < eps and abs(a[0] - pos) < eps:
                    olo = max(a[1], b[1], lo)
                    ohi = min(a[3], b[3], hi)
                    if ohi - olo > 1.2:
                        pairs.append((j, i, olo, ohi))
            else:
                if abs(a[3] - pos) < eps and abs(b[1] - pos) < eps:
                    olo = max(a[0], b[0], lo)
                    ohi = min(a[2], b[2], hi)
                    if ohi - olo > 1.2:
                        pairs.append((i, j, olo, ohi))
                elif abs(b[3] - pos) < eps and abs(a[1] - pos) < eps:
                    olo = max(a[0], b[0], lo)
                    ohi = min(a[2], b[2], hi)
                    if ohi - olo > 1.2:
                        pairs.append((j, i, olo, ohi))
    return pairs


class _DSU:
    def __init__(self, n):
        self.p = list(range(n))

    def find(self, i):
        while self.p[i] != i:
            self.p[i] = self.p[self.p[i]]
            i = self.p[i]
        return i

    def union(self, i, j):
        ri, rj = self.find(i), self.find(j)
        if ri == rj:
            return False
        self.p[ri] = rj
        return True


WALL_THICKNESS = 0.1


def _thick_wall(x1, y1, x2, y2, t=WALL_THICKNESS):
    """A wall segment as a thin closed rectangle (4 segments).

    Zero-thickness walls let noisy beam endpoints land behind the surface,
    minting phantom free cells and unstable frontier slivers.
    """
    dx, dy = x2 - x1, y2 - y1
    ln = math.hypot(dx, dy)
    if ln < 1e-9:
        return []
    nx, ny = -dy / ln * t / 2, dx / ln * t / 2
    a = (x1 + nx, y1 + ny)
    b = (x2 + nx, y2 + ny)
    c = (x2 - nx, y2 - ny)
    d = (x1 - nx, y1 - ny)
    return [(a[0], a[1], b[0], b[1]), (b[0], b[1], c[0], c[1]),
            (c[0], c[1], d[0], d[1]), (d[0], d[1], a[0], a[1])]


def _build_walls(rng, envelope, leaves, cuts, door_width):
    """Envelope plus cut walls, one doorway per adjacency chosen so every
    room stays connected (spanning tree plus an occasional extra door)."""
    x0, y0, x1, y1 = envelope
    t = WALL_THICKNESS
    walls = []
    # envelope band, thickened outward so interior dimensions stay put
    walls += _thick_wall(x0 - t / 2, y0 - t / 2, x1 + t / 2, y0 - t / 2)
    walls += _thick_wall(x1 + t / 2, y0 - t / 2, x1 + t / 2, y1 + t / 2)
    walls += _thick_wall(x1 + t / 2, y1 + t / 2, x0 - t / 2, y1 + t / 2)
    walls += _thick_wall(x0 - t / 2, y1 + t / 2, x0 - t / 2, y0 - t / 2)
    all_pairs = []
    for axis, pos, lo, hi in cuts:
        pairs = _leaf_pairs_across(leaves, axis, pos, lo, hi)
        for i, j, olo, ohi in pairs:
            all_pairs.append((axis, pos, i, j, olo, ohi))

    dsu = _DSU(len(leaves))
    doors = []   # (axis, pos, gap_lo, gap_hi)
    order = rng.permutation(len(all_pairs))
    chosen = []
    for k in order:
        axis, pos, i, j, olo, ohi = all_pairs[k]
        if dsu.union(i, j):
            chosen.append(all_pairs[k])
    # an extra door now and then makes loops, like real floor plans
    extras = [all_pairs[k] for k in order
              if all_pairs[k] not in chosen and rng.random() < 0.25]
    for axis, pos, i, j, olo, ohi in chosen + extras:
        room = (ohi - olo)
        margin = min(0.35, (room - door_width) / 2)
        gap_c = rng.uniform(olo + margin + door_width / 2,
                            ohi - margin - door_width / 2)
        doors.append((axis, pos, gap_c - door_width / 2, gap_c + door_width / 2))

    for axis, pos, lo, hi in cuts:
        gaps = sorted((glo, ghi) for a2, p2, glo, ghi in doors
                      if a2 == axis and abs(p2 - pos) < 1e-9
                      and glo >= lo - 1e-9 and ghi <= hi + 1e-9)
        cur = lo
        for glo, ghi in gaps:
            if glo > cur + 1e-6:
                walls += _thick_wall(*((pos, cur, pos, glo) if axis == "v"
                                       else (cur, pos, glo, pos)))
            cur = max(cur, ghi)
        if hi > cur + 1e-6:
            walls += _thick_wall(*((pos, cur, pos, hi) if axis == "v"
                                   else (cur, pos, hi, pos)))
    return segments_array(walls)


def _place_object(rng, room: Room, placed, label, size_range=(0.35, 0.75),
                  doors_xy=None, tries=25, walls=None):
    """Axis-aligned rectangle along one of the room's walls.

    Besides object spacing and doorway clearance, the footprint must not
    leave a sub-agent gap to any wall: every wall is either flush (the
    host wall) or at least a body width away.
    """
    from .geometry import points_segments_distance, rect_polygon

    x0, y0, x1, y1 = room.rect
    for _ in range(tries):
        w = rng.uniform(*size_range)
        h = rng.uniform(*size_range)
        side = int(rng.integers(4))
        off = WALL_MARGIN
        if side in (0, 1):
            lo, hi = x0 + w / 2 + 0.55, x1 - w / 2 - 0.55
            if lo >= hi:
                continue
            cx = rng.uniform(lo, hi)
            cy = y0 + off + h / 2 if side == 0 else y1 - off - h / 2
        else:
            lo, hi = y0 + h / 2 + 0.55, y1 - h / 2 - 0.55
            if lo >= hi:
                continue
            cy = rng.uniform(lo, hi)
            cx = x0 + off + w / 2 if side == 2 else x1 - off - w / 2
        ok = True
        for other in placed:
            ov = other.polygon.vertices
            ocx, ocy = ov.mean(axis=0)
            ow = ov[:, 0].max() - ov[:, 0].min()
            oh = ov[:, 1].max() - ov[:, 1].min()
            if abs(ocx - cx) < (w + ow) / 2 + 0.55 and \
               abs(ocy - cy) < (h + oh) / 2 + 0.55:
                ok = False
                break
        if ok and doors_xy is not None and len(doors_xy):
            d = np.linalg.norm(doors_xy - np.array([cx, cy]), axis=1)
            if (d < 0.9 + max(w, h) / 2).any():
                ok = False
        if ok and walls is not None and len(walls):
            poly = rect_polygon(cx, cy, w, h)
            samples = poly.perimeter_points(0.08)
            # distance from the footprint to each wall individually
            a = walls[:, 0:2][None, :, :]
            b = walls[:, 2:4][None, :, :]
            ab = b - a
            ap = samples[:, None, :] - a
            denom = (ab * ab).sum(-1)
            with np.errstate(divide="ignore", invalid="ignore"):
                t = np.where(denom > 0, (ap * ab).sum(-1) / denom, 0.0)
            t = np.clip(t, 0.0, 1.0)
            closest = a + t[:, :, None] * ab
            per_wall = np.linalg.norm(samples[:, None, :] - closest,
                                      axis=-1).min(axis=0)
            if ((per_wall > 0.12) & (per_wall < 0.45)).any():
                ok = False
        if ok:
            return rect_polygon(cx, cy, w, h)
    return None


def _door_centers(walls, rooms, envelope):
    """Approximate doorway centers: midpoints of gaps along cut lines."""
    # reconstruct from wall endpoints: collect cut lines and find gaps
    doors = []
    eps = 1e-6
    by_line = {}
    for x1, y1, x2, y2 in walls:
        if abs(x1 - x2) < eps:   # vertical
            by_line.setdefault(("v", round(x1, 6)), []).append((min(y1, y2), max(y1, y2)))
        elif abs(y1 - y2) < eps:
            by_line.setdefault(("h", round(y1, 6)), []).append((min(x1, x2), max(x1, x2)))
    ex0, ey0, ex1, ey1 = envelope
    for (axis, pos), spans in by_line.items():
        spans.sort()
        for (a0, a1), (b0, b1) in zip(spans[:-1], spans[1:]):
            if b0 - a1 > 0.2:
                mid = (a1 + b0) / 2
                doors.append((pos, mid) if axis == "v" else (mid, pos))
    return np.array(doors) if doors else np.empty((0, 2))


def _assign_kinds(rng, n_rooms, target_room, want_target_room):
    kinds = []
    pool = [k for k in ROOM_KINDS if k != target_room]
    idx_target = int(rng.integers(n_rooms)) if want_target_room else -1
    for i in range(n_rooms):
        if i == idx_target:
            kinds.append(target_room)
        else:
            kinds.append(pool[int(rng.integers(len(pool)))])
    return kinds


def _free_position(rng, scene_objects, walls, room: Room, clearance=0.45,
                   tries=40):
    x0, y0, x1, y1 = room.rect
    segs = [walls] + [o.polygon.edges() for o in scene_objects]
    segs = np.vstack([s for s in segs if len(s)])
    for _ in range(tries):
        p = np.array([rng.uniform(x0 + clearance, x1 - clearance),
                      rng.uniform(y0 + clearance, y1 - clearance)])
        if points_segments_distance(p[None, :], segs)[0] >= clearance:
            return p
    return None


def generate_scene(seed: int, family: str, target: str = "toilet",
                   kb: KnowledgeBase | None = None) -> Scene:
    """Deterministic scene for (seed, family)."""
    if family not in FAMILIES:
        raise ValueError(f"unknown scenario family {family!r}; "
                         f"expected one of {FAMILIES}")
    if kb is None:
        from .knowledge import load_profile
        kb = load_profile("hm3d")
    for attempt in range(40):
        rng = np.random.default_rng(
            np.random.SeedSequence([hash_family(family), seed, attempt]))
        if family == "corridor-maze":
            scene = _gen_maze(rng, seed, family, target,
                              size=8 if seed >= 100 else 6)
        else:
            scene = _gen_apartment(rng, seed, family, target, kb)
        if scene is not None and _validate(scene):
            return scene
    raise RuntimeError(f"scene generation failed for seed={seed} family={family}")


def hash_family(family: str) -> int:
    return {f: i + 101 for i, f in enumerate(FAMILIES)}[family]


def _validate(scene: Scene) -> bool:
    from .nav import NavParams, PlanningGrid, dijkstra_field

    g = scene.rasterize(0.1)
    pg = PlanningGrid(g, NavParams(inflation=0.12))
    start_rc = g.world_to_cell(scene.start.xy)
    if not g.in_bounds(*start_rc) or pg.blocked[start_rc]:
        return False
    targets = scene.target_instances()
    if not targets:
        return True     # target-absent / different-floor episodes
    dist, _ = dijkstra_field(pg, scene.start.xy)
    for obj in targets:
        pts = obj.polygon.perimeter_points(0.1)
        for p in pts:
            for dx, dy in ((0.25, 0), (-0.25, 0), (0, 0.25), (0, -0.25)):
                rc = g.world_to_cell((p[0] + dx, p[1] + dy))
                if g.in_bounds(*rc) and np.isfinite(dist[rc]):
                    return True
    return False


def _gen_apartment(rng, seed, family, target, kb) -> Scene | None:
    entry = kb.get(target)
    width = rng.uniform(8.5, 11.0)
    height = rng.uniform(6.8, 8.8)
    envelope = (0.0, 0.0, width, height)
    narrow = family == "collision-trap"
    leaves, cuts = _bsp_split(rng, [envelope],
                              min_side=3.0, max_rooms=int(rng.integers(4, 6)))
    door_w = NARROW_DOOR if narrow else DOOR_WIDTH
    walls = _build_walls(rng, envelope, leaves, cuts, door_w)

    want_room = entry.room != "everywhere" and family != "semantic-flat"
    if family == "semantic-flat":
        kinds = ["storage" if rng.random() < 0.5 else "hallway"
                 for _ in leaves]
    else:
        kinds = _assign_kinds(rng, len(leaves), entry.room, want_room)
    rooms = [Room(i, kinds[i], leaves[i]) for i in range(len(leaves))]
    doors_xy = _door_centers(walls, rooms, envelope)

    objects: list[SceneObject] = []
    # target instance(s)
    if want_room:
        candidates = [r for r in rooms if r.kind == entry.room]
    else:
        candidates = rooms
    t_room = candidates[int(rng.integers(len(candidates)))]
    n_targets = 1 if family != "apartment" else int(rng.integers(1, 3))
    placed_target = 0
    for _ in range(n_targets):
        poly = _place_object(rng, t_room, objects, target,
                             size_range=(0.4, 0.7), doors_xy=doors_xy,
                             walls=walls)
        if poly is not None:
            objects.append(SceneObject(target, poly, t_room.id))
            placed_target += 1
    if placed_target == 0 and family not in ("target-absent",):
        return None

    # similar objects spread over the other rooms
    similar = list(entry.similar)
    n_similar = int(rng.integers(3, 7))
    other_rooms = [r for r in rooms if r.id != t_room.id] or rooms
    for k in range(n_similar):
        label = similar[int(rng.integers(len(similar)))]
        room = other_rooms[int(rng.integers(len(other_rooms)))]
        poly = _place_object(rng, room, objects, label, doors_xy=doors_xy,
                             walls=walls)
        if poly is not None:
            objects.append(SceneObject(label, poly, room.id))

    # clutter outside the object list
    for k in range(int(rng.integers(1, 3))):
        room = rooms[int(rng.integers(len(rooms)))]
        poly = _place_object(rng, room, objects, "box",
                             size_range=(0.3, 0.55), doors_xy=doors_xy,
                             walls=walls)
        if poly is not None:
            objects.append(SceneObject("box", poly, room.id))

    if narrow:
        # free-standing pillars pinching the walkable space
        for room in rooms:
            if rng.random() < 0.75:
                x0, y0, x1, y1 = room.rect
                cx = (x0 + x1) / 2 + rng.uniform(-0.4, 0.4)
                cy = (y0 + y1) / 2 + rng.uniform(-0.4, 0.4)
                from .geometry import rect_polygon
                objects.append(SceneObject(
                    "pillar", rect_polygon(cx, cy, 0.18, 0.18), room.id))

    if family == "target-absent":
        objects = [o for o in objects if o.label != target]
    if family == "different-floor":
        for o in objects:
            if o.label == target:
                o.floor_id = 1

    start_rooms = [r for r in rooms if r.id != t_room.id] or rooms
    s_room = start_rooms[int(rng.integers(len(start_rooms)))]
    p = _free_position(rng, [o for o in objects if o.floor_id == 0],
                       walls, s_room)
    if p is None:
        return None
    yaw = rng.uniform(-math.pi, math.pi)
    name = f"{family}-{seed:04d}"
    strength = 1.0
    return Scene(name, family, seed, envelope, walls, rooms, objects,
                 Pose(float(p[0]), float(p[1]), float(yaw)), target,
                 semantic_strength=strength)


def _gen_maze(rng, seed, family, target, size=6, cell=1.6) -> Scene:
    """Serpentine corridor maze via recursive backtracking over a cell grid."""
    n = size
    visited = np.zeros((n, n), dtype=bool)
    passages = set()
    stack = [(0, 0)]
    visited[0, 0] = True
    while stack:
        r, c = stack[-1]
        neigh = [(r + dr, c + dc) for dr, dc in ((1, 0), (-1, 0), (0, 1), (0, -1))
                 if 0 <= r + dr < n and 0 <= c + dc < n and not visited[r + dr, c + dc]]
        if not neigh:
            stack.pop()
            continue
        nr, nc = neigh[int(rng.integers(len(neigh)))]
        passages.add(((r, c), (nr, nc)))
        passages.add(((nr, nc), (r, c)))
        visited[nr, nc] = True
        stack.append((nr, nc))

    walls = []
    w = n * cell
    envelope = (0.0, 0.0, w, w)
    t = WALL_THICKNESS
    walls += _thick_wall(-t / 2, -t / 2, w + t / 2, -t / 2)
    walls += _thick_wall(w + t / 2, -t / 2, w + t / 2, w + t / 2)
    walls += _thick_wall(w + t / 2, w + t / 2, -t / 2, w + t / 2)
    walls += _thick_wall(-t / 2, w + t / 2, -t / 2, -t / 2)
    gap = 1.0
    for r in range(n):
        for c in range(n):
            x0, y0 = c * cell, r * cell
            if c + 1 < n:
                if ((r, c), (r, c + 1)) not in passages:
                    walls += _thick_wall(x0 + cell, y0, x0 + cell, y0 + cell)
                else:
                    m = (cell - gap) / 2
                    walls += _thick_wall(x0 + cell, y0, x0 + cell, y0 + m)
                    walls += _thick_wall(x0 + cell, y0 + cell - m, x0 + cell, y0 + cell)
            if r + 1 < n:
                if ((r, c), (r + 1, c)) not in passages:
                    walls += _thick_wall(x0, y0 + cell, x0 + cell, y0 + cell)
                else:
                    m = (cell - gap) / 2
                    walls += _thick_wall(x0, y0 + cell, x0 + m, y0 + cell)
                    walls += _thick_wall(x0 + cell - m, y0 + cell, x0 + cell, y0 + cell)

    # BFS over the passage graph for the farthest cell from the entrance
    from collections import deque
    dist = {(0, 0): 0}
    q = deque([(0, 0)])
    while q:
        cur = q.popleft()
        for dr, dc in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            nxt = (cur[0] + dr, cur[1] + dc)
            if (cur, nxt) in passages and nxt not in dist:
                dist[nxt] = dist[cur] + 1
                q.append(nxt)
    far = max(dist, key=lambda k: dist[k])
    fx = far[1] * cell + cell / 2
    fy = far[0] * cell + cell / 2
    from .geometry import rect_polygon
    rooms = [Room(0, "hallway", envelope)]
    objects = [SceneObject(target, rect_polygon(fx, fy, 0.5, 0.5), 0)]
    start = Pose(cell / 2, cell / 2, float(rng.uniform(-math.pi, math.pi)))
    return Scene(f"{family}-{seed:04d}", family, seed, envelope,
                 segments_array(walls), rooms, objects, start, target)
