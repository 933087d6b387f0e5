"""Command-line entry point.

Exit codes: 0 success, 2 config error, 3 infeasible parameters,
4 when every row failed its hypothesis guard.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from .errors import ConfigError, HypothesisViolation, NoValidParamsError
from .experiments import emit, hypothesis_only, load_config, run_experiment

log = logging.getLogger("resolvability")

VERBS = {
    "sweep": "tv-sweep",
    "concentrate": "concentration",
    "second-order": "second-order",
    "converse": "converse-audit",
    "bounds": "bounds-table",
}
EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_HYPOTHESIS = 0, 2, 3, 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="resolvability", description="Channel resolvability experiments.")
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb, kind in VERBS.items():
        p = sub.add_parser(verb, help=f"run a {kind} experiment")
        p.add_argument("--config", required=True, type=Path, help="TOML experiment file")
        p.add_argument("--out", type=Path, help="output path (default: config 'output' or <verb>.<format>)")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--seed", type=int, help="override the master seed")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--plot", action="store_true", help="also write a PNG figure next to the output")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    kind = VERBS[args.verb]
    try:
        cfg = load_config(args.config)
        if cfg.experiment != kind:
            raise ConfigError(f"'{args.verb}' runs {kind} experiments, config says {cfg.experiment}", "experiment")
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ConfigError("seed must be an unsigned 64-bit integer", "seed")
            cfg = dataclasses.replace(cfg, seed=args.seed)
        if args.threads < 1:
            raise ConfigError("--threads must be positive", "threads")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out = args.out or Path(cfg.output or f"{args.verb}.{args.format}")
    try:
        rows = run_experiment(cfg, threads=args.threads)
    except NoValidParamsError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except HypothesisViolation as exc:
        print(f"hypothesis violated: {exc}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    try:
        emit(rows, kind, out, args.format)
        log.info("wrote %d rows to %s", len(rows), out)
        if args.plot:
            from .plotting import plot_rows

            fig = plot_rows(rows, kind, out.with_suffix(".png"))
            log.info("wrote figure %s", fig)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return EXIT_HYPOTHESIS if hypothesis_only(kind, rows) else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
