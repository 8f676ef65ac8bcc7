"""Command-line entry point: ``opaclab {train,evaluate,diagnose,aggregate,reference-cost}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import harness
from .config import load_config
from .errors import AlignmentError, ConfigError, InputError


def _add_common(p: argparse.ArgumentParser, need_out: bool = True) -> None:
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--seed", type=int, action="append",
                   help="seed (repeatable); defaults to the config's seeds")
    if need_out:
        p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                   help="config override, applied after --config")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="opaclab", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one run per seed")
    _add_common(p)

    p = sub.add_parser("evaluate", help="roll out a saved checkpoint")
    p.add_argument("checkpoint")
    p.add_argument("--episodes", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--deterministic", action="store_true", help="use the mean action")

    p = sub.add_parser("diagnose", help="TD and Q-estimation error of a checkpoint")
    p.add_argument("checkpoint")
    p.add_argument("--episodes", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("aggregate", help="IQM tables, profiles and cost-adjustment points")
    p.add_argument("runs", nargs="+", help="run directories (each with metrics.jsonl)")
    p.add_argument("--metric", default="episode_reward")
    p.add_argument("--out", required=True)

    p = sub.add_parser("reference-cost", help="suggest a cost limit from a penalty-free run")
    _add_common(p, need_out=False)
    p.add_argument("--out", help="optional directory for the reference run")
    return parser


def cmd_train(args) -> int:
    cfg = load_config(args.config, args.override)
    seeds = args.seed or list(cfg.seeds)
    out = Path(args.out)
    for seed in seeds:
        run_dir = out / f"seed_{seed}" if len(seeds) > 1 else out
        summary = harness.run_experiment(cfg, seed, run_dir, progress=args.verbose)
        status = "aborted" if summary.aborted else "ok"
        print(f"{cfg.algorithm} seed={seed} records={len(summary.records)} "
              f"final_reward={summary.final('episode_reward'):.4f} "
              f"final_cost={summary.final('episode_cost'):.4f} {status} -> {run_dir}")
    return 0


def cmd_evaluate(args) -> int:
    print(json.dumps(harness.evaluate(args.checkpoint, args.episodes, args.seed, args.deterministic), indent=2))
    return 0


def cmd_diagnose(args) -> int:
    print(json.dumps(harness.diagnose(args.checkpoint, args.episodes, args.seed), indent=2))
    return 0


def cmd_aggregate(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    table, profile = harness.aggregate(args.runs, args.metric)
    harness.write_rows(table, out / "iqm.csv")
    harness.write_rows(profile, out / "profile.csv")
    harness.write_rows(harness.fig2_points(args.runs), out / "fig2_points.csv")
    if table:
        last = table[-1]
        print(f"{args.metric} at step {last['env_step']}: iqm={last['iqm']:.4f} "
              f"min={last['min']:.4f} max={last['max']:.4f} ({last['n_runs']} runs)")
    print(f"wrote iqm.csv, profile.csv, fig2_points.csv to {out}")
    return 0


def cmd_reference_cost(args) -> int:
    cfg = load_config(args.config, args.override)
    seed = (args.seed or [cfg.seeds[0]])[0]
    m = harness.reference_cost_run(cfg, seed, args.out)
    print(f"suggested cost_limit = {m!r}")
    return 0


COMMANDS = {
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "diagnose": cmd_diagnose,
    "aggregate": cmd_aggregate,
    "reference-cost": cmd_reference_cost,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, InputError, AlignmentError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
