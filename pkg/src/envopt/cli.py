"""Command line entry point: ``envopt <subcommand> [--config PATH] [--seed N] [--out DIR] [--checkpoint PATH]``.

Exit status: 0 success, 2 configuration error, 3 runtime failure.
"""
from __future__ import annotations

import argparse
import glob
import json
import os
import sys

from .completeness import layout_capacity, offline_condition, online_capacity_condition, well_formed
from .discrete_env import GridWorld, navigate
from .geometry import EnvironmentLayout
from .harness import ConfigError, ExperimentConfig, run_training, run_trials
from .metrics import MetricsReport
from .plots import render_plots
from .trace import EpisodeTrace

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="envopt", description="Multi-agent environment optimization experiments.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out=True):
        sp.add_argument("--config", help="JSON config; missing keys fall back to the packaged defaults")
        sp.add_argument("--seed", type=int, help="override the config seed")
        if out:
            sp.add_argument("--out", default=None, help="output directory")
        return sp

    c = sub.add_parser("check", help="evaluate the completeness conditions for a layout JSON")
    c.add_argument("layout", help="layout JSON {bounds, starts, goals, obstacles}")
    c.add_argument("--radius", type=float, default=None, help="agent radius r_hat (default: config radius)")
    c.add_argument("--v-hat", type=float, default=None, help="agent speed bound (default: config v_max)")
    c.add_argument("--delta-dot", type=float, default=None,
                   help="obstacle area change rate (default: capacity of the layout's obstacles at v_max)")
    common(c, out=False)

    for name in ("train-offline", "train-online"):
        common(sub.add_parser(name, help=f"PPO training for the {name.split('-')[1]} setting"))

    e = common(sub.add_parser("eval", help="evaluate a trained checkpoint over the obstacle sweep"))
    e.add_argument("--checkpoint", required=True)

    b = common(sub.add_parser("baseline", help="evaluate the heuristic and/or the unmodified environment"))
    b.add_argument("--policy", choices=("heuristic", "none", "both"), default="both")

    pl = sub.add_parser("plot", help="render SVG figures from reports and traces")
    pl.add_argument("inputs", nargs="*",
                    help="*_metrics.json reports, *.jsonl traces, *_layouts.json before/after pairs, or run directories")
    pl.add_argument("--out", default="plots")
    pl.add_argument("--config")
    pl.add_argument("--seed", type=int)
    return p


def _config(args, **extra) -> ExperimentConfig:
    return ExperimentConfig.load(args.config, seed=args.seed, **extra)


def _out(args, default: str) -> str:
    out = args.out or default
    os.makedirs(out, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise PermissionError(f"output directory not writable: {out}")
    return out


def cmd_check(args) -> int:
    cfg = _config(args)
    try:
        with open(args.layout) as fh:
            layout = EnvironmentLayout.from_json(fh.read())
    except FileNotFoundError as e:
        raise ConfigError(f"layout file not found: {args.layout}") from e
    except (ValueError, KeyError) as e:
        raise ConfigError(f"invalid layout: {e}") from e
    r = args.radius if args.radius is not None else cfg.radius
    v = args.v_hat if args.v_hat is not None else cfg.v_max
    n = len(layout.starts)
    dd = args.delta_dot if args.delta_dot is not None else layout_capacity(layout, cfg.v_max)
    print(json.dumps({"condition": "offline", "n": n, **offline_condition(layout, n, r).to_dict()}))
    print(json.dumps({"condition": "online", "n": n, "delta_dot": dd, **online_capacity_condition(n, r, v, dd).to_dict()}))
    print(json.dumps({"condition": "well_formed", "satisfied": well_formed(layout, r)}))
    return EXIT_OK


def cmd_train(args, setting: str) -> int:
    cfg = _config(args, setting=setting)
    out = _out(args, os.path.join(cfg.out_dir, f"train-{setting}"))

    def log(row):
        print(f"update {row['update']:4d}  steps {row['env_steps']:8d}  return {row['mean_return']:.4f}  "
              f"spl {row['mean_spl']:.3f}", flush=True)

    run_training(cfg, out, callback=log)
    print(f"checkpoint written to {os.path.join(out, 'policy.bin')}")
    return EXIT_OK


def _setting_of_checkpoint(path) -> str | None:
    from .policy import load_policy

    pol = load_policy(path)
    return {"CnnPolicy": "offline", "GnnPolicy": "online"}.get(type(pol).__name__)


def cmd_eval(args) -> int:
    if not os.path.exists(args.checkpoint):
        raise ConfigError(f"checkpoint not found: {args.checkpoint}")
    cfg = _config(args, setting=_setting_of_checkpoint(args.checkpoint))
    out = _out(args, os.path.join(cfg.out_dir, "eval"))
    report, _, _ = run_trials(cfg, "trained", checkpoint=args.checkpoint, out_dir=out)
    sys.stdout.write(report.to_csv())
    return EXIT_OK


def cmd_baseline(args) -> int:
    cfg = _config(args)
    out = _out(args, os.path.join(cfg.out_dir, "baseline"))
    for src in (("heuristic", "none") if args.policy == "both" else (args.policy,)):
        report, _, _ = run_trials(cfg, src, out_dir=out)
        sys.stdout.write(report.to_csv())
    return EXIT_OK


def cmd_plot(args) -> int:
    files = []
    for item in args.inputs:
        files.extend(sorted(glob.glob(os.path.join(item, "*_metrics.json"))) if os.path.isdir(item) else [item])
    reports, traces, pairs = {}, [], []
    for f in files:
        if f.endswith("_layouts.json"):
            with open(f) as fh:
                lay = json.load(fh)
            before, after = GridWorld.from_dict(lay["before"]), GridWorld.from_dict(lay["after"])
            pairs.append((navigate(before), navigate(after)))
        elif f.endswith(".jsonl"):
            with open(f) as fh:
                traces.append(EpisodeTrace.from_jsonl(fh.read()))
        elif f.endswith(".json"):
            with open(f) as fh:
                rep = MetricsReport.from_json(fh.read())
            name = rep.rows[0].get("source", os.path.basename(f)) if rep.rows else os.path.basename(f)
            reports[name] = rep
        else:
            raise ConfigError(f"unrecognised plot input: {f}")
    if not reports and not traces and not pairs:
        raise ConfigError("no reports or traces given")
    out = _out(args, "plots")
    for path in render_plots(reports, traces, out, pairs=pairs):
        print(path)
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "check":
            return cmd_check(args)
        if args.command in ("train-offline", "train-online"):
            return cmd_train(args, args.command.split("-")[1])
        if args.command == "eval":
            return cmd_eval(args)
        if args.command == "baseline":
            return cmd_baseline(args)
        return cmd_plot(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as e:  # noqa: BLE001 - any other failure is a runtime failure
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
