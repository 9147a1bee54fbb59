"""Command-line entry point: `amu-sim run --config cfg.yaml --out results.csv`."""

from __future__ import annotations

import argparse
import logging
import os
import sys

from . import config as cfgmod
from . import runner

log = logging.getLogger("amusim")


def _setup_logging() -> None:
    level = os.environ.get("AMUSIM_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="amu-sim",
        description="Cycle-approximate far-memory latency-tolerance experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a sweep and write a result CSV")
    run.add_argument("--config", help="YAML config file (all fields optional)")
    run.add_argument("--out", help="result CSV path (default from config)")
    run.add_argument("--seed", type=int, help="override the run seed")
    run.add_argument("--json-summary", help="also write per-mode aggregates as JSON")
    run.add_argument("--override", action="append", default=[],
                     metavar="KEY=VALUE", help="dotted config override, repeatable")
    return parser


def cmd_run(args) -> int:
    overrides = list(args.override)
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    try:
        cfg = cfgmod.load_config(args.config, overrides)
    except (cfgmod.ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    rows = runner.run_sweep(cfg)
    out = args.out or cfg["output"]
    runner.write_csv(rows, out)
    if args.json_summary:
        runner.write_summary(rows, args.json_summary)
    failures = [r for r in rows if not r["verify"]]
    for row in rows:
        log.info("%s %s %gns: %d cycles mlp=%.2f ipc=%.3f verify=%s",
                 row["mode"], row["benchmark"], row["latency_ns"],
                 row["exec_cycles"], row["mlp"], row["ipc"], row["verify"])
    print(f"wrote {len(rows)} rows to {out}")
    if failures:
        for row in failures:
            print(f"verify FAILED: {row['mode']} {row['benchmark']} "
                  f"{row['latency_ns']}ns: {row['verify_detail']}", file=sys.stderr)
        return 1
    return 0


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return cmd_run(args)
    return 2


if __name__ == "__main__":
    sys.exit(main())
