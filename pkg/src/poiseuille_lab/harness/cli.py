"""Command line entry point.

One verb per experiment kind plus ``sweep`` and ``validate-config``.
Exit codes: 0 all criteria passed, 1 numerical failure (including a
partial sweep), 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import json
import sys

from ..errors import ConfigError, RunError
from .config import KINDS, ExperimentConfig, apply_overrides, load
from .runner import run, sweep

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _common(p: argparse.ArgumentParser, config_required: bool = False):
    p.add_argument("--config", metavar="PATH", required=config_required,
                   help="YAML experiment configuration")
    p.add_argument("--output", metavar="DIR", help="output directory (overrides output_dir)")
    p.add_argument("--threads", type=int, default=1, metavar="N",
                   help="worker processes for independent cells (default 1)")
    p.add_argument("--seed", type=int, metavar="N", help="seed for randomized data")
    p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                   help="set a config field by dotted path; repeatable")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="poiseuille-lab",
        description="Linear and nonlinear stability experiments around Poiseuille flow.")
    sub = parser.add_subparsers(dest="verb", required=True, metavar="VERB")
    for kind in KINDS:
        _common(sub.add_parser(kind, help=f"run a {kind} experiment"))
    _common(sub.add_parser("sweep", help="fan out over the configured sweep lists"),
            config_required=True)
    _common(sub.add_parser("validate-config", help="check a configuration and print its hash"),
            config_required=True)
    return parser


def resolve_config(args) -> ExperimentConfig:
    """Configuration after applying the verb, overrides and flags."""
    cfg = load(args.config) if args.config else ExperimentConfig()
    overrides = list(args.override)
    if args.verb in KINDS:
        overrides.insert(0, f"experiment.kind={args.verb}")
    if args.output:
        overrides.append(f"output_dir={json.dumps(args.output)}")
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    return apply_overrides(cfg, overrides)


def _report(rec, out):
    print(f"status: {rec.status}", file=out)
    for name, ok in rec.verdicts.items():
        print(f"  {'PASS' if ok else 'FAIL'}  {name}", file=out)
    for f in rec.failures:
        print(f"  failed cell {f['params']}: {f.get('error') or ', '.join(f['failed'])}",
              file=out)
    print(f"config hash: {rec.config_hash}", file=out)
    print(f"output: {rec.output_dir}", file=out)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_PASS
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = resolve_config(args)
        if args.verb == "validate-config":
            print(f"valid {cfg.kind} configuration, hash {cfg.hash()}")
            return EXIT_PASS
        rec = sweep(cfg, args.threads) if args.verb == "sweep" else run(cfg, args.threads)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except RunError as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    _report(rec, sys.stdout)
    return rec.exit_code


if __name__ == "__main__":
    sys.exit(main())
