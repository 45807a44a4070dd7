"""Batch episode runner: scenario packs, the episode loop, and suite output.

Every episode is a pure function of its spec and the agent configuration;
the worker pool gathers results in submission order so suites reproduce
byte-for-byte regardless of parallelism.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .agent import Agent, AgentConfig
from .episode import SimConfig, init_episode, step
from .geometry import Pose, rect_polygon
from .knowledge import load_profile
from .metrics import (
    EpisodeResult, classify_failure, compute_metrics, geodesic_at,
    goal_cells, goal_distance_field, score_episode,
)
from .nav import Action
from .scene import (Room, Scene, SceneObject, _thick_wall, generate_scene,
                    segments_array)
from .sensors import DetectorModel


@dataclass(frozen=True)
class EpisodeSpec:
    episode: int
    family: str
    scene_seed: int
    episode_seed: int
    target: str
    detector: str = "oracle"            # oracle / noisy / blind / decoy
    detector_args: tuple = ()           # e.g. (fp_rate, confusion_rate)
    profile: str = "hm3d"
    crafted: str | None = None          # crafted scene name overrides family


def make_detector(spec: EpisodeSpec, kb) -> DetectorModel:
    if spec.detector == "oracle":
        return DetectorModel.oracle()
    if spec.detector == "noisy":
        fp, conf = spec.detector_args if spec.detector_args else (0.10, 0.20)
        return DetectorModel.noisy(kb, spec.target, fp_rate=fp,
                                   confusion_rate=conf)
    if spec.detector == "blind":
        return DetectorModel.blind_to(spec.target)
    if spec.detector == "decoy":
        # every decoy-label sighting reads as the target, high confidence
        decoy = spec.detector_args[0] if spec.detector_args else "chair"
        return DetectorModel(tp_rate={decoy: 0.0, spec.target: 1.0},
                             confusion={decoy: {spec.target: 1.0}},
                             conf_false_mean=0.9, conf_false_spread=0.0)
    raise ValueError(f"unknown detector preset {spec.detector!r}")


# -------------------------------------------------------- crafted scenes

def crafted_scene(name: str, target: str = "toilet") -> Scene:
    """Hand-built scenes for the smoke test and the failure-taxonomy pack."""
    if name == "trivial":
        walls = segments_array(
            _thick_wall(-0.05, -0.05, 4.05, -0.05) +
            _thick_wall(4.05, -0.05, 4.05, 4.05) +
            _thick_wall(4.05, 4.05, -0.05, 4.05) +
            _thick_wall(-0.05, 4.05, -0.05, -0.05))
        rooms = [Room(0, "bathroom", (0, 0, 4, 4))]
        objects = [SceneObject(target, rect_polygon(3.0, 2.0, 0.5, 0.5), 0)]
        return Scene("trivial", "apartment", 0, (0, 0, 4, 4), walls, rooms,
                     objects, Pose(1.4, 2.0, 0.0), target)
    if name == "decoy-room":
        # decoy object near the start, true target behind a partition
        walls = segments_array(
            _thick_wall(-0.05, -0.05, 8.05, -0.05) +
            _thick_wall(8.05, -0.05, 8.05, 5.05) +
            _thick_wall(8.05, 5.05, -0.05, 5.05) +
            _thick_wall(-0.05, 5.05, -0.05, -0.05) +
            _thick_wall(5, 0, 5, 2.0) +
            _thick_wall(5, 3.0, 5, 5))
        rooms = [Room(0, "hallway", (0, 0, 5, 5)),
                 Room(1, "bathroom", (5, 0, 8, 5))]
        objects = [
            SceneObject("chair", rect_polygon(3.5, 4.2, 0.5, 0.5), 0),
            SceneObject(target, rect_polygon(7.4, 4.2, 0.5, 0.5), 1),
        ]
        return Scene("decoy-room", "apartment", 0, (0, 0, 8, 5), walls, rooms,
                     objects, Pose(1.0, 1.0, 0.0), target)
    raise ValueError(f"unknown crafted scene {name!r}")


def build_scene(spec: EpisodeSpec, kb) -> Scene:
    if spec.crafted is not None:
        return crafted_scene(spec.crafted, spec.target)
    return generate_scene(spec.scene_seed, spec.family, spec.target, kb)


# ------------------------------------------------------------------ packs

def _plain_pack(family, detector="oracle", detector_args=(), target="toilet",
                maze_size=None):
    def build(seeds):
        return [EpisodeSpec(i, family, s, _episode_seed(s), target,
                            detector, detector_args)
                for i, s in enumerate(seeds)]
    return build


def _episode_seed(scene_seed: int) -> int:
    return int(np.random.SeedSequence([scene_seed, 23]).generate_state(1)[0])


def _strategy_mix(seeds):
    specs = []
    for i, s in enumerate(seeds):
        family = "semantic-rich" if i % 2 == 0 else "semantic-flat"
        specs.append(EpisodeSpec(i, family, s, _episode_seed(s), "toilet"))
    return specs


def _taxonomy(seeds):
    # one episode per failure category; seeds are fixed by design
    return [
        EpisodeSpec(0, "apartment", 0, _episode_seed(1000), "toilet",
                    crafted="trivial"),
        EpisodeSpec(1, "different-floor", 3, _episode_seed(1001), "toilet"),
        EpisodeSpec(2, "apartment", 0, _episode_seed(1002), "toilet",
                    detector="decoy", detector_args=("chair",),
                    crafted="decoy-room"),
        EpisodeSpec(3, "target-absent", 5, _episode_seed(1003), "toilet"),
        EpisodeSpec(4, "corridor-maze", 102, _episode_seed(1004), "toilet",
                    detector="blind"),
        EpisodeSpec(5, "apartment", 7, _episode_seed(1005), "toilet",
                    detector="blind"),
    ]


PACKS = {
    "smoke": _plain_pack("apartment"),
    "apartment-oracle": _plain_pack("apartment"),
    "misdetection": _plain_pack("apartment", detector="noisy",
                                detector_args=(0.10, 0.20)),
    "strategy-mix": _strategy_mix,
    "collision-trap": _plain_pack("collision-trap"),
    "different-floor": _plain_pack("different-floor"),
    "taxonomy": _taxonomy,
}

FIXED_PACKS = {"taxonomy"}


def pack_specs(pack: str, seeds) -> list[EpisodeSpec]:
    if pack not in PACKS:
        raise ValueError(f"unknown pack {pack!r}; known: {sorted(PACKS)}")
    if pack in FIXED_PACKS:
        return PACKS[pack](None)
    return PACKS[pack](list(seeds))


# ---------------------------------------------------------------- episode

def run_episode(spec: EpisodeSpec, config: AgentConfig,
                keep_trace: bool = False):
    """One full episode: returns (EpisodeResult, trace-json or None)."""
    kb = load_profile(spec.profile)
    scene = build_scene(spec, kb)
    detector = make_detector(spec, kb)
    sim = SimConfig()
    state = init_episode(scene, sim, detector, kb, spec.episode_seed)
    agent = Agent(config, kb, scene.target, scene.grid_spec())

    while not state.terminated:
        action = agent.decide(state.last_obs)
        step(state, action)

    stop_kind = None
    if state.stop_issued and agent.trace.entries:
        last = agent.trace.entries[-1].phase
        stop_kind = "exhausted" if last == "exhausted" else "target"

    true_grid = scene.rasterize()
    field = goal_distance_field(true_grid, scene)
    d_init = geodesic_at(field, true_grid, scene.start.xy)
    d_final = geodesic_at(field, true_grid, state.pose.xy)
    has_goal = bool(scene.target_instances())
    if not has_goal:
        d_init = d_final = math.inf

    # success is judged against the navigable viewpoint ring around the
    # target: the stop pose must fall within success distance of a free
    # cell adjacent to an annotated target footprint
    gc = goal_cells(true_grid, scene)
    if len(gc):
        centers = true_grid.cell_centers(gc)
        d_stop = float(np.linalg.norm(centers - state.pose.xy, axis=1).min())
    else:
        d_stop = math.inf
    success = bool(state.stop_issued and d_stop <= sim.success_dist)
    near = state.min_target_dist <= 1.0
    outcome = classify_failure(success, scene.all_targets_off_floor(),
                               stop_kind, near, state.stepout)
    result = EpisodeResult(
        episode=spec.episode,
        family=spec.family,
        scene_seed=spec.scene_seed,
        target=spec.target,
        outcome=outcome,
        success=success,
        steps=state.steps,
        path_length=state.path_length,
        shortest_path=d_init if math.isfinite(d_init) else 0.0,
        d_init=d_init if math.isfinite(d_init) else 0.0,
        d_final=d_final if math.isfinite(d_final) else 0.0,
        collisions=state.collisions,
        stop_kind=stop_kind,
        near_target=near,
    )
    score_episode(result)
    trace = [e.to_json() for e in agent.trace.entries] if keep_trace else None
    return result, trace


def _worker(args):
    spec, config, keep_trace = args
    result, trace = run_episode(spec, config, keep_trace)
    return result, trace


def _worker_init():
    # one BLAS thread per worker; the grids are small and the workers
    # otherwise trample each other
    import os
    os.environ["OMP_NUM_THREADS"] = "1"
    os.environ["OPENBLAS_NUM_THREADS"] = "1"
    os.environ["MKL_NUM_THREADS"] = "1"


def run_suite(pack: str, config: AgentConfig, seeds, jobs: int = 1,
              keep_traces: bool = False):
    """All episodes of a pack; deterministic result order."""
    specs = pack_specs(pack, seeds)
    tasks = [(spec, config, keep_traces) for spec in specs]
    if jobs <= 1:
        out = [_worker(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs,
                                 initializer=_worker_init) as pool:
            out = list(pool.map(_worker, tasks, chunksize=1))
    results = [r for r, _ in out]
    traces = [t for _, t in out]
    return results, traces


# ------------------------------------------------------------------ output

def write_records(out_dir, results: list[EpisodeResult],
                  aggregate_extra: dict | None = None,
                  traces=None) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with (out / "episodes.jsonl").open("w", encoding="utf-8") as fh:
        for r in results:
            fh.write(json.dumps(r.to_json(), sort_keys=True) + "\n")
    agg = compute_metrics(results).to_json()
    if aggregate_extra:
        agg.update(aggregate_extra)
    cols = list(agg)
    with (out / "aggregate.csv").open("w", encoding="utf-8") as fh:
        fh.write(",".join(cols) + "\n")
        fh.write(",".join(str(agg[c]) for c in cols) + "\n")
    if traces is not None and any(t is not None for t in traces):
        tdir = out / "traces"
        tdir.mkdir(exist_ok=True)
        for r, t in zip(results, traces):
            if t is None:
                continue
            with (tdir / f"episode_{r.episode:04d}.jsonl").open(
                    "w", encoding="utf-8") as fh:
                for entry in t:
                    fh.write(json.dumps(entry, sort_keys=True) + "\n")


def parse_seeds(text: str) -> list[int]:
    """'0..9' (inclusive), '3', or '1,4,7'."""
    text = text.strip()
    if ".." in text:
        lo, hi = text.split("..")
        return list(range(int(lo), int(hi) + 1))
    if "," in text:
        return [int(t) for t in text.split(",") if t.strip()]
    return [int(text)]
