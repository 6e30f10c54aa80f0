"""Command line entry point: ``shufflelab run | check | permute``."""

from __future__ import annotations

import argparse
import json
import os
import sys

from .checks import run_theory_checks
from .errors import ConfigError, ParseError
from .harness import SEED_ENV, dump_trace, emit_results, load_config, render_csv, run_experiment_detailed
from .shuffling import make_scheme, next_permutation

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_CHECK = 0, 1, 2, 3


def _cmd_run(args) -> int:
    overrides = {}
    if args.out:
        overrides["output"] = args.out
    if args.format:
        overrides["format"] = args.format
    if args.workers:
        overrides["workers"] = str(args.workers)
    if args.trace:
        overrides["trace"] = "true"
    for item in args.set or ():
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        overrides[key.strip()] = value.strip()
    cfg = load_config(args.config, overrides)
    result = run_experiment_detailed(cfg)
    if cfg.output:
        emit_results(result.rows, cfg.format, cfg.output)
        if cfg.trace:
            dump_trace(result, cfg.output + ".trace.jsonl")
    else:
        sys.stdout.write(render_csv(result.rows))
    return EXIT_OK


def _cmd_check(args) -> int:
    results = run_theory_checks(args.suite)
    if args.json:
        print(json.dumps([r.__dict__ for r in results], indent=2, default=str))
    else:
        for r in results:
            print(r.line())
    return EXIT_OK if all(r.passed for r in results) else EXIT_CHECK


def _cmd_permute(args) -> int:
    seed = args.seed if args.seed is not None else int(os.environ.get(SEED_ENV, "0"), 0)
    scheme = make_scheme(args.scheme, seed)
    losses = [float(x) for x in args.losses.split(",")] if args.losses else []
    for e in range(args.epochs):
        loss = losses[e] if e < len(losses) else 1.0
        pi = next_permutation(scheme, args.n, e, loss if scheme.needs_feedback else None)
        extra = ""
        if hasattr(scheme, "state"):
            extra = f"  # {scheme.state.last_regime}" + (f"+{scheme.state.last_transform}"
                                                        if scheme.state.last_transform else "")
        print(" ".join(map(str, pi.tolist())) + extra)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shufflelab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment config")
    run.add_argument("--config", required=True)
    run.add_argument("--out")
    run.add_argument("--format", choices=("csv", "json"))
    run.add_argument("--trace", action="store_true", help="also dump per-trial records as JSON lines")
    run.add_argument("--workers", type=int)
    run.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
    run.set_defaults(func=_cmd_run)

    check = sub.add_parser("check", help="run the numerical theory checks")
    check.add_argument("--suite", default="all", choices=("all", "variance", "epochmap", "apr"))
    check.add_argument("--json", action="store_true")
    check.set_defaults(func=_cmd_check)

    perm = sub.add_parser("permute", help="print the permutations a scheme generates")
    perm.add_argument("--scheme", required=True)
    perm.add_argument("--n", type=int, required=True)
    perm.add_argument("--epochs", type=int, default=1)
    perm.add_argument("--seed", type=lambda s: int(s, 0))
    perm.add_argument("--losses", help="comma-separated loss per epoch for APR (default 1.0)")
    perm.set_defaults(func=_cmd_permute)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError) as exc:
        if isinstance(exc, ParseError):
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_IO
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
