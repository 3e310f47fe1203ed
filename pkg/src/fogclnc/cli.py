"""Command-line entry point: ``fogclnc {run,history,train,validate}``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, ScenarioConfig, format_config, load_config

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 2, 3


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="key = value scenario file")
    common.add_argument("--seed", type=int, help="override the master seed")
    common.add_argument("--out", type=Path, help="output file")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="fogclnc", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", parents=[common], help="run a Monte-Carlo experiment and write a CSV")
    run.add_argument("--scheme", action="append", help="delivery scheme (repeatable); defaults to the config")
    run.add_argument("--realizations", type=int)
    run.add_argument("--dump-graphs", type=Path, metavar="DIR", help="write DOT conflict graphs of realization 0")
    sub.add_parser("history", parents=[common], help="generate a history profile (.npz)")
    sub.add_parser("train", parents=[common], help="learn a cache placement and write the learning trace CSV")
    sub.add_parser("validate", parents=[common], help="check a config file and print the resolved settings")
    return p


def _load(args) -> ScenarioConfig:
    cfg = load_config(args.config) if args.config else ScenarioConfig()
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if getattr(args, "scheme", None):
        changes["schemes"] = tuple(args.scheme)
    if getattr(args, "realizations", None) is not None:
        changes["realizations"] = args.realizations
    return cfg.replace(**changes) if changes else cfg


def _save_history(history, path: Path) -> None:
    channels = [c for c, _ in history.entries]
    sides = [s for _, s in history.entries]
    np.savez_compressed(
        path,
        fap_positions=history.topology.fap_positions,
        ced2d_positions=history.topology.ced2d_positions,
        user_positions=history.topology.user_positions,
        fap_gain=np.stack([c.fap_gain for c in channels]),
        d2d_gain=np.stack([c.d2d_gain for c in channels]),
        has=np.stack([s.has_matrix for s in sides]),
        wants=np.stack([s.wants_array for s in sides]),
    )


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = _load(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    from . import harness, marl

    try:
        if args.command == "validate":
            sys.stdout.write(format_config(cfg))
        elif args.command == "run":
            rows = harness.run_experiment(cfg, args.dump_graphs)
            if args.out:
                harness.emit_csv(rows, args.out)
            else:
                harness.write_rows(rows, sys.stdout)
        elif args.command == "history":
            _save_history(harness.generate_history(cfg), args.out or Path("history.npz"))
        elif args.command == "train":
            history = harness.generate_history(cfg)
            cache, res = harness.learn_cache("marl", history, cfg)
            if args.out:
                marl.write_trace(res.trace, args.out)
            else:
                marl.write_trace_rows(res.trace, sys.stdout)
            print(f"cached files: {cache.count()} of {cache.placement.size}", file=sys.stderr)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK
