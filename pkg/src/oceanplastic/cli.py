"""Command-line entry point.

Subcommands: train, eval, dump-scenario, report, render-paths.
Config values come from the config file, then OPC_* environment
variables, then command-line flags (highest precedence).
"""

from __future__ import annotations

import argparse
import os
import shutil
import sys

import numpy as np

from . import evalkit, scenario, trainer
from .errors import OceanPlasticError

ENV_PREFIX = "OPC_"

_INT_OVERRIDES = {"max_steps", "master_seed", "pebble_count", "num_areas",
                  "summary_freq", "keep_checkpoints", "episode_max_steps"}


def _env_overrides() -> dict:
    """OPC_MAX_STEPS=100 style overrides; key is lowercased config key."""
    overrides = {}
    for name, value in os.environ.items():
        if not name.startswith(ENV_PREFIX):
            continue
        key = name[len(ENV_PREFIX):].lower()
        if key in _INT_OVERRIDES:
            overrides[key] = int(float(value))
        elif key == "mode":
            overrides[key] = value.lower()
        else:
            overrides[key] = value
    return overrides


def _load_config(args) -> trainer.ExperimentConfig:
    overrides = _env_overrides()
    if getattr(args, "mode", None):
        overrides["mode"] = args.mode
    if getattr(args, "max_steps", None) is not None:
        overrides["max_steps"] = args.max_steps
    if getattr(args, "seed", None) is not None:
        overrides["master_seed"] = args.seed
    if args.config:
        return trainer.load_config(args.config, overrides)
    config = trainer.ExperimentConfig()
    return trainer.load_config_overrides(config, overrides)


def cmd_train(args) -> int:
    config = _load_config(args)
    out_dir = args.out
    os.makedirs(out_dir, exist_ok=True)
    if args.config:
        shutil.copy(args.config, os.path.join(out_dir, "config.txt"))
    result = trainer.run_training(config, out_dir)
    print(f"trained {result.final_step} steps, {result.num_updates} updates")
    print(f"checkpoint: {result.checkpoint_path}")
    print(f"metrics: {result.metrics_path}")
    return 0


def cmd_eval(args) -> int:
    config = _load_config(args)
    out_dir = args.out
    result = trainer.run_eval(
        args.checkpoint,
        config,
        os.path.join(out_dir, "logs"),
        num_steps=args.num_steps,
        deterministic_actions=args.deterministic,
    )
    report_csv = os.path.join(out_dir, "report.csv")
    with open(report_csv, "w") as fh:
        fh.write(result.report.to_csv())
    print(result.report.to_text())
    if args.deterministic:
        print("(deterministic actions: mean thrust/turn, argmax signal)")
    print(f"report: {report_csv}")
    return 0


def cmd_dump_scenario(args) -> int:
    spec = scenario.ScenarioSpec(
        seed=args.seed if args.seed is not None else 0,
        y_shift=args.y_shift,
        area_size=args.area_size,
        pebble_count=args.pebble_count,
    )
    field = scenario.density_field(spec)
    pebbles = scenario.spawn_pebbles(field, spec)
    os.makedirs(args.out, exist_ok=True)
    dump_path = os.path.join(args.out, f"scenario_{spec.seed}_{spec.y_shift:g}.txt")
    with open(dump_path, "w") as fh:
        fh.write(scenario.dump_scenario(spec, pebbles))
    heatmap_path = os.path.join(args.out, f"heatmap_{spec.seed}_{spec.y_shift:g}.png")
    _write_heatmap(field, heatmap_path)
    print(f"scenario dump: {dump_path}")
    print(f"heatmap: {heatmap_path}")
    return 0


def _write_heatmap(field: scenario.DensityField, path) -> None:
    from PIL import Image

    # Blue (low likelihood) to red (high), row 0 at the top = max y.
    values = field.values[::-1]
    rgb = np.zeros((*values.shape, 3), dtype=np.uint8)
    rgb[..., 0] = (values * 255).astype(np.uint8)
    rgb[..., 1] = ((1.0 - np.abs(values - 0.5) * 2.0) * 160).astype(np.uint8)
    rgb[..., 2] = ((1.0 - values) * 255).astype(np.uint8)
    Image.fromarray(rgb, mode="RGB").save(path)


def cmd_report(args) -> int:
    logs = [evalkit.load_log(path) for path in args.logs]
    report = evalkit.build_report(logs, window=args.window, dead_band=args.dead_band)
    print(report.to_text())
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(report.to_csv())
        print(f"report: {args.out}")
    return 0


def cmd_render_paths(args) -> int:
    log = evalkit.load_log(args.log)
    evalkit.render_paths(log, args.out)
    print(f"paths: {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oceanplastic",
        description="Multi-agent plastic-collector training and analysis",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="run a training experiment")
    train.add_argument("--config", help="flat key = value config file")
    train.add_argument("--seed", type=int, help="master seed override")
    train.add_argument("--mode", choices=["ma", "mac"])
    train.add_argument("--max-steps", type=int, dest="max_steps")
    train.add_argument("--out", default="runs/train", help="run output directory")
    train.set_defaults(func=cmd_train)

    evaluate = sub.add_parser("eval", help="evaluate a checkpoint on test seeds")
    evaluate.add_argument("checkpoint")
    evaluate.add_argument("--config", help="flat key = value config file")
    evaluate.add_argument("--seed", type=int)
    evaluate.add_argument("--mode", choices=["ma", "mac"])
    evaluate.add_argument("--max-steps", type=int, dest="max_steps")
    evaluate.add_argument("--num-steps", type=int, default=1_000_000)
    evaluate.add_argument("--deterministic", action="store_true")
    evaluate.add_argument("--out", default="runs/eval")
    evaluate.set_defaults(func=cmd_eval)

    dump = sub.add_parser("dump-scenario", help="write pebble layout and heatmap")
    dump.add_argument("--seed", type=int, default=0)
    dump.add_argument("--y-shift", type=float, default=0.0, dest="y_shift")
    dump.add_argument("--area-size", type=float, default=200.0, dest="area_size")
    dump.add_argument("--pebble-count", type=int, default=400, dest="pebble_count")
    dump.add_argument("--out", default="runs/scenario")
    dump.set_defaults(func=cmd_dump_scenario)

    report = sub.add_parser("report", help="aggregate replay logs into a report")
    report.add_argument("logs", nargs="+")
    report.add_argument("--window", type=int, default=evalkit.DEFAULT_WINDOW)
    report.add_argument("--dead-band", type=float, default=evalkit.DEFAULT_DEAD_BAND,
                        dest="dead_band")
    report.add_argument("--out")
    report.set_defaults(func=cmd_report)

    render = sub.add_parser("render-paths", help="render vessel paths to SVG")
    render.add_argument("log")
    render.add_argument("--out", default="paths.svg")
    render.set_defaults(func=cmd_render_paths)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except OceanPlasticError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
