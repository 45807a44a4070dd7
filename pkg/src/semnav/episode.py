"""Episode state: agent kinematics, collision handling, and per-step sensing."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Pose, segment_segments_distance
from .grid import Scan
from .knowledge import KnowledgeBase
from .nav import Action, FORWARD_STEP, TURN_ANGLE
from .scene import Scene
from .semantic_map import FramedScore
from .sensors import (
    DEFAULT_BEAMS, DEFAULT_FOV, DEFAULT_RANGE, DetectorModel, RawDetection,
    sense_depth, sense_detections, sense_semantic_score,
)

MAX_STEPS = 500


class EpisodeStateError(RuntimeError):
    """Action applied to a terminated episode."""


@dataclass
class SimConfig:
    n_beams: int = DEFAULT_BEAMS
    fov: float = DEFAULT_FOV
    max_range: float = DEFAULT_RANGE
    range_noise: float = 0.01
    max_steps: int = MAX_STEPS
    agent_radius: float = 0.1
    success_dist: float = 0.2


@dataclass
class Observation:
    pose: Pose
    scan: Scan
    detections: list[RawDetection]
    frame: FramedScore
    step: int
    collided: bool = False


@dataclass
class EpisodeState:
    scene: Scene
    config: SimConfig
    detector: DetectorModel
    kb: KnowledgeBase
    seed: int
    pose: Pose = None
    steps: int = 0
    collisions: int = 0
    path_length: float = 0.0
    min_target_dist: float = math.inf
    terminated: bool = False
    stop_issued: bool = False
    stepout: bool = False
    last_obs: Observation = None
    _segs: np.ndarray = None
    _rng_depth: np.random.Generator = None
    _rng_detect: np.random.Generator = None
    _rng_score: np.random.Generator = None


def init_episode(scene: Scene, config: SimConfig, detector: DetectorModel,
                 kb: KnowledgeBase, seed: int) -> EpisodeState:
    state = EpisodeState(scene, config, detector, kb, seed)
    state.pose = Pose(scene.start.x, scene.start.y, scene.start.yaw)
    state._segs = scene.obstacle_segments()
    state._rng_depth = np.random.default_rng(np.random.SeedSequence([seed, 11]))
    state._rng_detect = np.random.default_rng(np.random.SeedSequence([seed, 13]))
    state._rng_score = np.random.default_rng(np.random.SeedSequence([seed, 17]))
    state.min_target_dist = scene.target_distance(state.pose.xy)
    state.last_obs = _sense(state, collided=False)
    return state


def _sense(state: EpisodeState, collided: bool) -> Observation:
    cfg = state.config
    scan = sense_depth(state.scene, state.pose, state._rng_depth,
                       n_beams=cfg.n_beams, fov=cfg.fov,
                       max_range=cfg.max_range, noise=cfg.range_noise)
    labels = state_labels(state)
    detections = sense_detections(state.scene, state.pose, state.detector,
                                  state._rng_detect, labels, scan=scan)
    frame = sense_semantic_score(state.scene, state.pose, state.scene.target,
                                 state.kb, state._rng_score, scan=scan,
                                 fov=cfg.fov, max_range=cfg.max_range)
    return Observation(state.pose, scan, detections, frame, state.steps,
                       collided)


def state_labels(state: EpisodeState) -> list[str]:
    from .knowledge import object_list

    if state.scene.target in state.kb:
        return object_list(state.kb, state.scene.target)
    return [state.scene.target]


def blocked_move(state: EpisodeState, frm: np.ndarray, to: np.ndarray) -> bool:
    """Swept-disc collision: the move is blocked when the path segment comes
    within the agent radius of any obstacle segment."""
    d = segment_segments_distance(frm, to, state._segs)
    return d < state.config.agent_radius


def step(state: EpisodeState, action: Action) -> EpisodeState:
    """Advance one action; sensing refreshes unless the episode terminated."""
    if state.terminated:
        raise EpisodeStateError("step() on a terminated episode")

    collided = False
    if action == Action.STOP:
        state.stop_issued = True
        state.terminated = True
        state.steps += 1
        return state
    if action == Action.MOVE_FORWARD:
        target = state.pose.moved(FORWARD_STEP)
        if blocked_move(state, state.pose.xy, target.xy):
            collided = True
            state.collisions += 1
        else:
            state.pose = target
            state.path_length += FORWARD_STEP
    elif action == Action.TURN_LEFT:
        state.pose = state.pose.turned(TURN_ANGLE)
    elif action == Action.TURN_RIGHT:
        state.pose = state.pose.turned(-TURN_ANGLE)
    elif action == Action.LOOK_UP:
        state.pose = Pose(state.pose.x, state.pose.y, state.pose.yaw,
                          state.pose.camera_pitch + TURN_ANGLE)
    elif action == Action.LOOK_DOWN:
        state.pose = Pose(state.pose.x, state.pose.y, state.pose.yaw,
                          state.pose.camera_pitch - TURN_ANGLE)

    state.steps += 1
    state.min_target_dist = min(state.min_target_dist,
                                state.scene.target_distance(state.pose.xy))
    if state.steps >= state.config.max_steps:
        state.terminated = True
        state.stepout = True
        return state
    state.last_obs = _sense(state, collided)
    return state
