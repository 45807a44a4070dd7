"""The per-step decision loop.

Priorities: initialization spin, then reliable targets, then frontier
exploration, then suspected targets once no frontier remains, and finally
a terminal stop. Maps, the score field and the cluster store refresh every
step regardless of the phase.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .explore import (
    ExplorationState, Mode, Policy, StrategyConfig, next_waypoint,
)
from .frontiers import FrontierTracker
from .fusion import (
    ClusterStore, FusionParams, FusionVariant, classify_targets,
    preprocess_detection,
)
from .geometry import Pose, wrap_angle
from .grid import (GridMap, compute_esdf, integrate_scan, raycast,
                   ray_first_nonfree)
from .knowledge import KnowledgeBase, object_list
from .nav import (
    Action, NavParams, NoRouteError, PathPlan, PlanningGrid, astar,
    follow_path_action, local_target, select_action,
)
from .semantic_map import (SemanticScoreMap, frontier_score, project_frame,
                           visible_free_cells)

SPIN_STEPS = 12
HIGH_DCT = 0.60


@dataclass
class AgentConfig:
    strategy: StrategyConfig = field(default_factory=StrategyConfig)
    nav: NavParams = field(default_factory=NavParams)
    fusion: FusionParams = field(default_factory=FusionParams)
    knowledge_profile: str = "hm3d"
    dct: float = 0.25
    spin_steps: int = SPIN_STEPS
    no_fusion: bool = False
    no_fusion_high_dct: bool = False
    max_fusion: bool = False
    no_similar_objects: bool = False
    no_observation_penalty: bool = False
    shortest_path_only: bool = False

    def __post_init__(self):
        overwrite = self.no_fusion or self.no_fusion_high_dct
        if overwrite and self.max_fusion:
            raise ValueError("no_fusion and max_fusion are mutually exclusive")
        if overwrite:
            self.fusion.variant = FusionVariant.OVERWRITE
        elif self.max_fusion:
            self.fusion.variant = FusionVariant.MAX
        if self.no_observation_penalty:
            self.fusion.observation_penalty = False

    @property
    def effective_dct(self) -> float:
        return HIGH_DCT if self.no_fusion_high_dct else self.dct


@dataclass
class TraceEntry:
    step: int
    phase: str                   # spin / reliable / frontier / suspected / exhausted
    action: str
    mode: str | None = None
    waypoint: tuple | None = None
    stats: tuple | None = None   # (r, sigma, n_f)
    costs: dict | None = None
    n_reliable: int = 0
    n_suspected: int = 0
    clusters: list = field(default_factory=list)

    def to_json(self) -> dict:
        out = {"step": self.step, "phase": self.phase, "action": self.action,
               "n_reliable": self.n_reliable, "n_suspected": self.n_suspected}
        if self.mode is not None:
            out["mode"] = self.mode
        if self.waypoint is not None:
            out["waypoint"] = [round(v, 4) for v in self.waypoint]
        if self.stats is not None:
            out["stats"] = {"r": round(self.stats[0], 6),
                            "sigma": round(self.stats[1], 6),
                            "n_f": self.stats[2]}
        if self.costs:
            out["costs"] = {k: {"target": round(v.target, 4),
                                "prox": round(v.prox, 4),
                                "safe": round(v.safe, 4)}
                            for k, v in self.costs.items()}
        if self.clusters:
            out["clusters"] = self.clusters
        return out


@dataclass
class DecisionTrace:
    entries: list[TraceEntry] = field(default_factory=list)

    def append(self, entry: TraceEntry) -> None:
        self.entries.append(entry)


class Agent:
    """Single-episode decision maker over a fresh belief state."""

    def __init__(self, config: AgentConfig, kb: KnowledgeBase, target: str,
                 grid_spec: dict, fov: float = math.pi / 2,
                 sense_range: float = 5.0):
        self.config = config
        self.kb = kb
        self.target = target
        self.fov = fov
        self.sense_range = sense_range
        self.grid = GridMap(**grid_spec)
        self.sem = SemanticScoreMap(self.grid)
        self.tracker = FrontierTracker()
        if target in kb:
            entry = kb.get(target)
            self.labels = object_list(kb, target,
                                      include_similar=not config.no_similar_objects)
            self.config.fusion.c_th = entry.c_th
        else:
            self.labels = [target]
        self.store = ClusterStore(self.labels, self.config.fusion)
        self.explore_state = ExplorationState()
        self.trace = DecisionTrace()
        self.spin_remaining = config.spin_steps
        # pursuit bookkeeping: clusters that soak steps without the gap
        # closing get blacklisted so the episode cannot burn out on them
        self._pursuit_id = None
        self._pursuit_best = math.inf
        self._pursuit_stall = 0
        self._blacklist: set[int] = set()
        self._last_action: Action | None = None
        self._stationary_streak = 0
        self._force_count = 0
        self._fatigue: dict = {}
        self._banned_spots: list[np.ndarray] = []
        self.viewed = np.zeros((self.grid.height, self.grid.width), dtype=bool)
        self._pursuit: dict[int, list] = {}
        self._pg = None
        self._path_cache = None   # (goal_xy, PathPlan)

    # -- belief updates -----------------------------------------------

    def _update_maps(self, obs) -> None:
        integrate_scan(self.grid, obs.scan)
        self.tracker.update(self.grid, self.grid.last_changed)
        if self._pg is None:
            self._pg = PlanningGrid(self.grid, self.config.nav)
        else:
            self._pg.refresh(self.grid.last_changed)
        rows, cols, bearing = visible_free_cells(self.grid, obs.pose,
                                                 self.fov, self.sense_range)
        if len(rows):
            half = self.fov / 2.0
            score = obs.frame.score
            c_cur = np.cos((bearing / half) * (math.pi / 2.0)) ** 2
            s_pre = self.sem.score[rows, cols]
            c_pre = self.sem.conf[rows, cols]
            total = c_cur + c_pre
            upd = total > 0
            rs, cs = rows[upd], cols[upd]
            self.sem.score[rs, cs] = (c_cur[upd] * score +
                                      c_pre[upd] * s_pre[upd]) / total[upd]
            self.sem.conf[rs, cs] = (c_cur[upd] ** 2 + c_pre[upd] ** 2) / total[upd]
            dist2 = (self.grid.origin[0] + (cols + 0.5) * self.grid.resolution
                     - obs.pose.x) ** 2 +                     (self.grid.origin[1] + (rows + 0.5) * self.grid.resolution
                     - obs.pose.y) ** 2
            near = dist2 <= (self.sense_range * 0.9) ** 2
            self.viewed[rows[near], cols[near]] = True
        for cl in self.tracker.clusters:
            cl.score = frontier_score(self.sem, cl)

    def _update_fusion(self, obs) -> None:
        dct = self.config.effective_dct
        fused_ids = set()
        for raw in obs.detections:
            if raw.label not in self.store.labels:
                continue
            if raw.confidence < dct:
                continue
            det = preprocess_detection(raw.points, raw.confidence, raw.label,
                                       self.grid, self.config.fusion)
            if det is None:
                continue
            cl = self.store.ingest(det, self.grid)
            fused_ids.add(cl.id)
        in_view = set()
        for cl in self.store.clusters:
            if not cl.footprint:
                continue
            centroid = cl.centroid(self.grid)
            rel = centroid - obs.pose.xy
            dist = float(np.linalg.norm(rel))
            if dist > self.sense_range:
                continue
            bearing = wrap_angle(math.atan2(rel[1], rel[0]) - obs.pose.yaw)
            if abs(bearing) > self.fov / 2:
                continue
            if not self.grid.point_in_bounds(centroid):
                continue
            # confirmed sightline only: unknown cells block, so clusters
            # behind unmapped walls never take false absence penalties
            hit = ray_first_nonfree(self.grid, obs.pose.xy, centroid)
            if hit is not None and hit in cl.footprint:
                in_view.add(cl.id)
        self.store.penalize_unseen(fused_ids, in_view, obs.scan.hit_points())

    # -- navigation helpers ---------------------------------------------

    def _cluster_goal_point(self, cluster) -> np.ndarray:
        """Nearest point of the cluster, preferring one the agent can see;
        a blind nearest point may sit in a pocket behind clutter."""
        entry = cluster.entry(self.target)
        if len(entry.points):
            pts = entry.points
        else:
            pts = cluster.all_points()
        if len(pts) == 0:
            return cluster.centroid(self.grid)
        order = np.argsort(np.linalg.norm(pts - self._pose.xy, axis=1))
        for idx in order[:30]:
            if self._stop_point_visible(pts[idx], cluster.footprint, pts):
                return pts[idx]
        return pts[int(order[0])]

    def _ray_clear(self, esdf, frm, to, margin: float) -> bool:
        """Straight segment keeps `margin` clearance on the belief map.

        Samples hugging the start pose are exempt: a pose already against
        a wall must still be allowed to run away from it.
        """
        frm = np.asarray(frm, float)
        to = np.asarray(to, float)
        d = float(np.linalg.norm(to - frm))
        n = max(2, int(d / 0.08) + 1)
        for i in range(1, n + 1):
            t = i / n
            if t * d < 0.12:
                continue
            p = frm + (to - frm) * t
            if esdf.distance_at(p) < margin:
                return False
        return True

    def _los_clamp(self, path, p_local, esdf) -> np.ndarray:
        """Pull the carrot back to the farthest path point reachable by a
        reasonably clear straight run; carrots past corners or grazing
        wall tips stall the controller. Clearance demands relax in stages
        so tight passages still yield a usable carrot."""
        pose_xy = self._pose.xy
        candidates = []
        for pt in path.points[1:]:
            candidates.append(pt)
            if np.array_equal(pt, p_local):
                break
        for margin in (0.12, 0.08):
            if self._ray_clear(esdf, pose_xy, p_local, margin):
                return p_local
            best = None
            for pt in candidates:
                if self._ray_clear(esdf, pose_xy, pt, margin):
                    best = pt
            if best is not None and \
                    float(np.linalg.norm(best - pose_xy)) >= 0.2:
                return best
        best = None
        for pt in candidates:
            if raycast(self.grid, pose_xy, pt) is None:
                best = pt
        if best is not None:
            return best
        return path.points[min(1, len(path.points) - 1)]

    def _frontier_fatigue(self, center) -> bool:
        """Per-spot stall bookkeeping; ban a frontier spot after 30 pursued
        steps without closing in (occluded corner frontiers would otherwise
        soak the whole step budget). Keyed by a coarse grid so the counter
        survives cluster churn and goal bouncing."""
        d = float(np.linalg.norm(self._pose.xy - center))
        key = (int(center[0] / 0.4), int(center[1] / 0.4))
        best, stall = self._fatigue.setdefault(key, [d, 0])
        if d < best - 0.1:
            self._fatigue[key] = [d, 0]
            return False
        self._fatigue[key][1] = stall + 1
        if stall + 1 > 30:
            self._banned_spots.append(np.asarray(center, dtype=float))
            return True
        return False

    def _not_banned(self, cluster) -> bool:
        for spot in self._banned_spots:
            if float(np.linalg.norm(cluster.center - spot)) < 0.45:
                return False
        return True

    def _patrol_clusters(self):
        """Unviewed free space, grouped like frontier clusters."""
        from .frontiers import cluster_frontiers
        from .grid import FREE

        mask = (self.grid.state == FREE) & ~self.viewed
        cells = {(int(r), int(c)) for r, c in np.argwhere(mask)}
        if not cells:
            return []
        return cluster_frontiers(cells, self.grid, max_extent=2.0,
                                 min_cells=8, start_id=0)

    def _liveness_override(self, action: Action, obs) -> Action:
        """Break stationary-rotation deadlocks: the cost terms can make
        turning in place the optimum forever, so after a full fruitless
        rotation take the forward step anyway (collision handling then
        jitters the agent free)."""
        if action in (Action.TURN_LEFT, Action.TURN_RIGHT,
                      Action.LOOK_UP, Action.LOOK_DOWN):
            self._stationary_streak += 1
            # drifting threshold: a fixed one resonates with the 12-step
            # rotation period and retries the same blocked heading forever
            if self._stationary_streak >= 13 + self._force_count % 5 \
                    and not obs.collided:
                self._stationary_streak = 0
                self._force_count += 1
                return Action.MOVE_FORWARD
        else:
            self._stationary_streak = 0
        return action

    def _pursuit_progress(self, cluster_id, goal) -> bool:
        """Track distance progress toward each cluster goal; blacklist a
        cluster after 40 pursued steps without closing 0.1 m."""
        d = float(np.linalg.norm(self._pose.xy - np.asarray(goal)))
        best, stall = self._pursuit.setdefault(cluster_id, [d, 0])
        if d < best - 0.1:
            self._pursuit[cluster_id] = [d, 0]
            return True
        self._pursuit[cluster_id][1] = stall + 1
        if stall + 1 > 40:
            self._blacklist.add(cluster_id)
            return False
        return True

    def _local_esdf(self):
        n = int(math.ceil((self.config.nav.d_local + 0.6) / self.grid.resolution))
        r0, c0 = self.grid.world_to_cell(self._pose.xy)
        region = (max(0, r0 - n), max(0, c0 - n),
                  min(self.grid.height, r0 + n + 1),
                  min(self.grid.width, c0 + n + 1))
        return compute_esdf(self.grid, region)

    def _plan(self, pg, goal_xy):
        """A* with a step-to-step cache: reuse the previous plan while the
        goal is unchanged, the agent stays on it, and it remains clear."""
        cached = self._path_cache
        pose_xy = self._pose.xy
        if cached is not None:
            goal0, path0 = cached
            if float(np.linalg.norm(np.asarray(goal_xy) - goal0)) < 0.05:
                d = np.linalg.norm(path0.points - pose_xy, axis=1)
                k = int(np.argmin(d))
                if d[k] <= 0.3:
                    pts = path0.points[k:]
                    if len(pts) >= 2:
                        rc = self.grid.cells_of(pts)
                        if not self._pg.blocked[rc[:, 0], rc[:, 1]].any():
                            seg = np.linalg.norm(np.diff(pts, axis=0), axis=1).sum()
                            trimmed = PathPlan(pts, float(seg))
                            return trimmed
        path = astar(pg, pose_xy, goal_xy)
        self._path_cache = (np.asarray(goal_xy, dtype=float), path)
        return path

    def _stop_point_visible(self, stop_point, footprint,
                            cluster_pts=None) -> bool:
        """Clear ray to the point, allowing hits on the object's own body."""
        hit = raycast(self.grid, self._pose.xy, stop_point)
        if hit is None or hit in footprint:
            return True
        hc = self.grid.cell_center(*hit)
        if float(np.linalg.norm(hc - np.asarray(stop_point))) <= 0.12:
            return True
        if cluster_pts is not None and len(cluster_pts):
            return float(np.linalg.norm(cluster_pts - hc, axis=1).min()) <= 0.25
        return False

    def _navigate(self, goal_xy, stop_point, pg, obs, footprint=frozenset(),
                  cluster_pts=None):
        pose = self._pose
        p_local = None
        if stop_point is not None:
            d_goal = float(np.linalg.norm(pose.xy - np.asarray(stop_point)))
            if d_goal <= self.config.nav.d_local and \
                    self._stop_point_visible(stop_point, footprint, cluster_pts):
                # final approach: aim straight at the object point; path
                # planning around the inflated blob only causes flapping
                p_local = np.asarray(stop_point, dtype=float)
        esdf = self._local_esdf()
        if p_local is None:
            path = self._plan(pg, goal_xy)
            p_local = local_target(path, self.config.nav.d_local)
            if stop_point is not None and path.length <= self.config.nav.d_local:
                p_local = np.asarray(goal_xy, dtype=float)
            else:
                p_local = self._los_clamp(path, p_local, esdf)
        prefer = self._last_action \
            if self._last_action in (Action.TURN_LEFT, Action.TURN_RIGHT) else None
        if self.config.shortest_path_only:
            if stop_point is not None:
                d = float(np.linalg.norm(pose.xy - np.asarray(stop_point)))
                if d <= self.config.nav.success_dist + 0.1:
                    return Action.STOP, {}
            return follow_path_action(pose, p_local,
                                      forbid_forward=obs.collided,
                                      prefer_turn=prefer), {}
        # success is judged against the navigable ring next to the object,
        # so stopping a body length short of the surface still succeeds
        stop_dist = self.config.nav.success_dist + 0.1
        return select_action(pose, p_local, esdf, self.config.nav,
                             stop_point=stop_point, forbid_forward=obs.collided,
                             stop_dist=stop_dist, prefer_turn=prefer)

    # -- the decision loop ------------------------------------------------

    def decide(self, obs) -> Action:
        self._pose = obs.pose
        self._update_maps(obs)
        self._update_fusion(obs)
        reliable, suspected = classify_targets(self.store.clusters,
                                               self.target,
                                               self.config.fusion.c_th)
        entry = TraceEntry(step=obs.step, phase="", action="",
                           n_reliable=len(reliable),
                           n_suspected=len(suspected))
        entry.clusters = [
            {"id": cl.id,
             "c": round(cl.entry(self.target).confidence, 4),
             "n": round(cl.entry(self.target).volume, 1)}
            for cl in reliable + suspected]

        if self.spin_remaining > 0:
            self.spin_remaining -= 1
            entry.phase = "spin"
            entry.action = Action.TURN_LEFT.value
            self.trace.append(entry)
            self._last_action = Action.TURN_LEFT
            return Action.TURN_LEFT

        pg = self._pg

        # (2) reliable target; single-frame clusters wait one step so a
        # corroborating observation (or an absence penalty) can weigh in
        for cluster in reliable:
            if cluster.id in self._blacklist or cluster.observations < 2:
                continue
            goal = self._cluster_goal_point(cluster)
            if not self._pursuit_progress(cluster.id, goal):
                continue
            try:
                action, costs = self._navigate(
                    goal, goal, pg, obs, footprint=cluster.footprint,
                    cluster_pts=cluster.entry(self.target).points)
            except NoRouteError:
                continue
            action = self._liveness_override(action, obs)
            entry.phase = "reliable"
            entry.waypoint = (float(goal[0]), float(goal[1]))
            entry.action = action.value
            entry.costs = costs
            self.trace.append(entry)
            self._last_action = action
            return action

        # (3) frontier exploration
        clusters = list(self.tracker.clusters)
        tried: set[int] = set()
        while True:
            cand = [cl for cl in clusters
                    if cl.id not in tried and self._not_banned(cl)]
            choice = next_waypoint(self._pose.xy, cand, pg,
                                   self.config.strategy, self.explore_state)
            if choice is None:
                break
            if self._frontier_fatigue(choice.cluster.center):
                tried.add(choice.cluster.id)
                self.explore_state.goal_id = None
                self.explore_state.goal_cells = None
                continue
            try:
                action, costs = self._navigate(choice.cluster.center, None,
                                               pg, obs)
            except NoRouteError:
                tried.add(choice.cluster.id)
                self.explore_state.goal_id = None
                self.explore_state.goal_cells = None
                continue
            action = self._liveness_override(action, obs)
            entry.phase = "frontier"
            entry.mode = choice.mode.value
            entry.stats = (choice.stats.r, choice.stats.sigma, choice.stats.n_f)
            entry.waypoint = (float(choice.cluster.center[0]),
                              float(choice.cluster.center[1]))
            entry.action = action.value
            entry.costs = costs
            self.trace.append(entry)
            self._last_action = action
            return action

        # (3b) coverage patrol: map frontiers are gone but some free space
        # was never inside the camera cone; face it before giving up, or a
        # wall-flush target the depth map skimmed past stays undetected
        patrol = self._patrol_clusters()
        tried = set()
        while True:
            cand = [cl for cl in patrol
                    if cl.id not in tried and self._not_banned(cl)]
            if not cand:
                break
            by_dist = min(cand, key=lambda cl: (
                float(np.linalg.norm(cl.center - self._pose.xy)), cl.id))
            if self._frontier_fatigue(by_dist.center):
                tried.add(by_dist.id)
                continue
            try:
                action, costs = self._navigate(by_dist.center, None, pg, obs)
            except NoRouteError:
                tried.add(by_dist.id)
                continue
            entry.phase = "patrol"
            entry.waypoint = (float(by_dist.center[0]), float(by_dist.center[1]))
            entry.action = action.value
            entry.costs = costs
            self.trace.append(entry)
            self._last_action = action
            return action

        # (4) suspected targets, only after frontiers ran out
        for cluster in suspected:
            if cluster.id in self._blacklist:
                continue
            goal = self._cluster_goal_point(cluster)
            if not self._pursuit_progress(cluster.id, goal):
                continue
            try:
                action, costs = self._navigate(
                    goal, goal, pg, obs, footprint=cluster.footprint,
                    cluster_pts=cluster.entry(self.target).points)
            except NoRouteError:
                continue
            action = self._liveness_override(action, obs)
            entry.phase = "suspected"
            entry.waypoint = (float(goal[0]), float(goal[1]))
            entry.action = action.value
            entry.costs = costs
            self.trace.append(entry)
            self._last_action = action
            return action

        # (5) nothing left to do
        entry.phase = "exhausted"
        entry.action = Action.STOP.value
        self.trace.append(entry)
        return Action.STOP
