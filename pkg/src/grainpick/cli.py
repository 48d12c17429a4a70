"""Command line orchestration: train, finetune, eval, sweep-noise, replay,
and metrics. Every run writes a resolved config snapshot next to its outputs.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .checkpoint import CheckpointError, load_params
from .episode_log import ReplayMismatch, replay_states
from .evaluate import BASELINE_NAMES, evaluate, results_csv, sweep_noise
from .metrics import MetricsSeries
from .render import render_frame, save_ppm
from .runconfig import ConfigError, RunConfig
from .training import train


def _load_config(args) -> RunConfig:
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    if getattr(args, "mode", None):
        cfg.set("world.mode", args.mode)
    if getattr(args, "seed", None) is not None:
        cfg.set("seed", args.seed)
    if getattr(args, "objects", None):
        cfg.set("objects", args.objects)
    if getattr(args, "force_noise", None) is not None:
        cfg.set("sensor.force_noise_halfwidth", args.force_noise)
    if getattr(args, "trials", None) is not None:
        cfg.set("eval.trials", args.trials)
    if getattr(args, "steps", None) is not None:
        cfg.set("train.total_steps", args.steps)
    return cfg


def _common(p, out_default="runs/out"):
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--out", default=out_default, help="output directory")


def cmd_train(args) -> int:
    cfg = _load_config(args)
    result = train(cfg, args.out, int(cfg["seed"]),
                   int(cfg["train.total_steps"]))
    print(f"trained {result.env_steps} env steps, {result.episodes} episodes "
          f"({result.skipped} skipped) in {result.elapsed:.1f}s")
    print(f"running success: best {result.best_running:.3f} "
          f"final {result.final_running:.3f}")
    print(f"checkpoint: {result.checkpoint_path}")
    print(f"metrics: {result.metrics_path}")
    return 0


def cmd_finetune(args) -> int:
    cfg = _load_config(args)
    if not getattr(args, "mode", None):
        cfg.set("world.mode", "granular")
    try:
        params = load_params(args.from_checkpoint)
    except (CheckpointError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    result = train(cfg, args.out, int(cfg["seed"]),
                   int(cfg["train.total_steps"]), init_params=params,
                   tag="finetuned")
    print(f"fine-tuned for {result.env_steps} env steps; running success "
          f"best {result.best_running:.3f} final {result.final_running:.3f}")
    print(f"checkpoint: {result.checkpoint_path}")
    return 0


def cmd_eval(args) -> int:
    cfg = _load_config(args)
    objects = cfg.objects()
    try:
        results = evaluate(args.policy, cfg, objects,
                           int(cfg["eval.trials"]), int(cfg["seed"]),
                           log_dir=args.save_logs)
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg.write_snapshot(out / "config.snapshot")
    csv = results_csv(results)
    (out / "eval.csv").write_text(csv)
    print(csv, end="")
    return 0


def cmd_sweep_noise(args) -> int:
    cfg = _load_config(args)
    grid = [float(x) for x in args.grid.split(",") if x.strip()]
    if any(x < 0 for x in grid):
        print("error: noise grid values must be >= 0", file=sys.stderr)
        return 2
    policies = [p.strip() for p in args.policies.split(",") if p.strip()]
    try:
        csv = sweep_noise(policies, cfg, cfg.objects(),
                          int(cfg["eval.trials"]), int(cfg["seed"]), grid)
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg.write_snapshot(out / "config.snapshot")
    (out / "sweep.csv").write_text(csv)
    print(csv, end="")
    return 0


def cmd_replay(args) -> int:
    frames_dir = Path(args.frames)
    frames_dir.mkdir(parents=True, exist_ok=True)
    try:
        for i, (state, contacts) in enumerate(replay_states(args.log)):
            save_ppm(render_frame(state, contacts),
                     frames_dir / f"frame_{i:04d}.ppm")
    except (ReplayMismatch, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    print(f"wrote {i + 1} frames to {frames_dir}")
    return 0


def cmd_metrics(args) -> int:
    path = Path(args.metrics)
    if not path.exists():
        print(f"error: no such metrics file: {path}", file=sys.stderr)
        return 2
    series = MetricsSeries(window=1000)
    rows = path.read_text().splitlines()
    best = 0.0
    for line in rows[1:]:
        if not line or line.startswith("#"):
            continue
        parts = line.split(",")
        running = series.add(parts[4] == "1")
        best = max(best, running)
        naive = series.naive_running_rate()
        if abs(running - naive) > 0:
            print(f"error: streaming window diverged at episode {len(series)}",
                  file=sys.stderr)
            return 1
    print(f"episodes: {len(series)}")
    print(f"overall success: {sum(series.flags) / max(1, len(series)):.4f}")
    print(f"final running success (1000): {series.running_rate():.4f}")
    print(f"best running success (1000): {best:.4f}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="grainpick",
        description="Buried-object retrieval: simulator, PPO trainer, baselines")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="PPO training in tabletop or granular mode")
    _common(p)
    p.add_argument("--mode", choices=["tabletop", "granular"])
    p.add_argument("--objects", help="comma-separated object list")
    p.add_argument("--steps", type=int, help="environment step budget")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("finetune", help="resume training from a checkpoint")
    _common(p)
    p.add_argument("--from-checkpoint", required=True,
                   dest="from_checkpoint", help="initial checkpoint path")
    p.add_argument("--mode", choices=["tabletop", "granular"])
    p.add_argument("--objects")
    p.add_argument("--steps", type=int)
    p.set_defaults(fn=cmd_finetune)

    p = sub.add_parser("eval", help="per-object success table")
    _common(p)
    p.add_argument("--policy", required=True,
                   help=f"checkpoint path or one of {BASELINE_NAMES}")
    p.add_argument("--objects")
    p.add_argument("--trials", type=int)
    p.add_argument("--force-noise", type=float, dest="force_noise")
    p.add_argument("--mode", choices=["tabletop", "granular"])
    p.add_argument("--save-logs", help="directory for per-episode logs")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("sweep-noise", help="success vs force-noise grid")
    _common(p)
    p.add_argument("--policies", required=True,
                   help="comma-separated checkpoint paths / baseline names")
    p.add_argument("--grid", default="0.2,1.0,2.0,3.0",
                   help="force-noise halfwidths in newtons")
    p.add_argument("--objects")
    p.add_argument("--trials", type=int)
    p.add_argument("--mode", choices=["tabletop", "granular"])
    p.set_defaults(fn=cmd_sweep_noise)

    p = sub.add_parser("replay", help="render an episode log to PPM frames")
    p.add_argument("--log", required=True, help="episode log (JSONL)")
    p.add_argument("--frames", required=True, help="output frame directory")
    p.set_defaults(fn=cmd_replay)

    p = sub.add_parser("metrics", help="verify and summarize a metrics CSV")
    p.add_argument("--metrics", required=True, help="metrics CSV from train")
    p.set_defaults(fn=cmd_metrics)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
