"""Command line entry point ``hse``.

Precedence for ``hse run``: experiment preset < ``--config`` JSON < flags.
Exit codes: 0 success, 2 configuration error, 3 numerical invariant violation.
"""
from __future__ import annotations

import argparse
import json
import sys

from .runner import (
    EXPERIMENTS,
    ConfigError,
    NumericalInvariantError,
    krylov_report,
    load_config,
    run_experiment,
)
from .selftest import run_selftest

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


def _moments(text: str) -> list[int]:
    try:
        return [int(k) for k in text.split(",") if k.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"--k expects comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hse", description="Ergodicity metrics for Fibonacci-driven brickwork circuits.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment and write CSV/JSON outputs")
    run.add_argument("--config", help="JSON config file")
    run.add_argument("--experiment", choices=EXPERIMENTS)
    run.add_argument("--n", dest="n_sites", type=int)
    run.add_argument("--d", dest="local_dim", type=int)
    run.add_argument("--t-max", dest="horizon", type=int)
    run.add_argument("--instances", type=int)
    run.add_argument("--seed", type=int)
    run.add_argument("--out")
    run.add_argument("--k", dest="moments", type=_moments)
    run.add_argument("--per-decade", dest="per_decade", type=int)

    kry = sub.add_parser("krylov", help="pair-flip sector audit")
    kry.add_argument("--n", dest="n_sites", type=int, required=True)
    kry.add_argument("--d", dest="local_dim", type=int, required=True)

    sub.add_parser("selftest", help="oracle-equivalence checks")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            overrides = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
            if args.config is None and args.experiment is None:
                raise ConfigError("give --config or --experiment")
            config = load_config(args.config, overrides)
            record = run_experiment(config)
            print(json.dumps({"complete": record.complete, "files": sorted(record.files),
                              "wall_clock_seconds": round(record.wall_clock, 3)}))
        elif args.command == "krylov":
            if args.n_sites < 1 or args.local_dim < 2:
                raise ConfigError("need --n >= 1 and --d >= 2")
            report = krylov_report(args.n_sites, args.local_dim)
            print(json.dumps(report, indent=1))
            if report.get("formula_agrees") is False:
                raise NumericalInvariantError("closed forms disagree with the sector graph")
        else:
            results = run_selftest()
            for name, ok, detail in results:
                print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
            if not all(ok for _, ok, _ in results):
                return EXIT_NUMERICAL
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalInvariantError as exc:
        print(f"numerical invariant violated: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
