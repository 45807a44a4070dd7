"""Command line entry points: run suites, generate scenes, report results."""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .agent import AgentConfig
from .explore import Policy, StrategyConfig
from .metrics import CATEGORIES, compute_metrics
from .runner import (
    PACKS, EpisodeSpec, pack_specs, parse_seeds, run_suite, write_records,
)
from .scene import FAMILIES, generate_scene

ABLATIONS = {
    "none": {},
    "no-fusion": {"no_fusion": True},
    "no-fusion-high-dct": {"no_fusion_high_dct": True},
    "max-fusion": {"max_fusion": True},
    "no-similar-objects": {"no_similar_objects": True},
    "no-observation": {"no_observation_penalty": True},
    "shortest-path": {"shortest_path_only": True},
}


def build_config(strategy: str, ablation: str, profile: str) -> AgentConfig:
    policy = Policy(strategy)
    flags = ABLATIONS[ablation]
    return AgentConfig(strategy=StrategyConfig(policy=policy),
                       knowledge_profile=profile, **flags)


def cmd_run(args) -> int:
    seeds = parse_seeds(args.seeds)
    if "SEMNAV_SEED" in os.environ:
        base = int(os.environ["SEMNAV_SEED"])
        seeds = [base + s for s in seeds]
    try:
        config = build_config(args.strategy, args.ablation, args.profile)
        results, traces = run_suite(args.pack, config, seeds, jobs=args.jobs,
                                    keep_traces=args.traces)
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    extra = {"pack": args.pack, "strategy": args.strategy,
             "ablation": args.ablation}
    if args.out:
        write_records(args.out, results, aggregate_extra=extra,
                      traces=traces if args.traces else None)
    agg = compute_metrics(results)
    print(f"pack={args.pack} strategy={args.strategy} ablation={args.ablation}")
    print(f"episodes={agg.episodes} SR={agg.sr:.2f}% SPL={agg.spl:.4f} "
          f"SoftSPL={agg.softspl:.4f} DTG={agg.dtg:.3f}m "
          f"collisions={agg.mean_collisions:.2f}")
    print("failures: " + " ".join(f"{c}={agg.failures[c]}" for c in CATEGORIES))
    return 0


def cmd_gen_scenes(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i in range(args.count):
        scene = generate_scene(args.seed + i, args.family, args.target)
        path = out / f"{scene.name}.json"
        scene.save(path)
        print(path)
    return 0


def cmd_report(args) -> int:
    src = Path(args.input)
    records = src / "episodes.jsonl"
    if not records.exists():
        print(f"error: no episode records in {src}", file=sys.stderr)
        return 1
    rows = [json.loads(line) for line in
            records.read_text(encoding="utf-8").splitlines() if line.strip()]
    if not rows:
        print("error: episode record file is empty", file=sys.stderr)
        return 1
    n = len(rows)
    sr = 100.0 * sum(r["success"] for r in rows) / n
    spl = sum(r["spl"] for r in rows) / n
    soft = sum(r["softspl"] for r in rows) / n
    dtg = sum(r["d_final"] for r in rows) / n
    print(f"episodes={n} SR={sr:.2f}% SPL={spl:.4f} SoftSPL={soft:.4f} "
          f"DTG={dtg:.3f}m")
    print("failure histogram:")
    for c in CATEGORIES:
        count = sum(1 for r in rows if r["outcome"] == c)
        bar = "#" * count
        print(f"  {c}: {count:4d} {bar}")
    return 0


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="semnav",
        description="Object-search episodes: run benchmark packs, generate "
                    "scenes, and summarize results.")
    sub = ap.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a scenario pack")
    run_p.add_argument("--pack", required=True, choices=sorted(PACKS))
    run_p.add_argument("--strategy", default="adaptive",
                       choices=[p.value for p in Policy])
    run_p.add_argument("--ablation", default="none", choices=sorted(ABLATIONS))
    run_p.add_argument("--seeds", default="0..9",
                       help="'0..99', '7', or '1,4,9'")
    run_p.add_argument("--jobs", type=int, default=1)
    run_p.add_argument("--out", default=None, help="output directory")
    run_p.add_argument("--profile", default="hm3d", choices=["hm3d", "mp3d"])
    run_p.add_argument("--traces", action="store_true",
                       help="keep per-step decision traces")
    run_p.set_defaults(func=cmd_run)

    gen_p = sub.add_parser("gen-scenes", help="write scene files")
    gen_p.add_argument("--family", required=True, choices=FAMILIES)
    gen_p.add_argument("--count", type=int, default=1)
    gen_p.add_argument("--seed", type=int, default=0)
    gen_p.add_argument("--target", default="toilet")
    gen_p.add_argument("--out", default="scenes")
    gen_p.set_defaults(func=cmd_gen_scenes)

    rep_p = sub.add_parser("report", help="summarize a results directory")
    rep_p.add_argument("--in", dest="input", required=True)
    rep_p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
