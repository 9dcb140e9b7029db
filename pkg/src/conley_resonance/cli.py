"""Command line: ``run``, ``check``, ``orbit`` and ``list``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import bundled_configs, load_config
from .errors import ConfigError
from .nonlinearity import REGISTRY
from .pipeline import EXIT_CONFIG, run_experiment
from .report import emit


def list_registry() -> str:
    lines = ["nonlinearities:"]
    lines += [f"  {name:<20} {REGISTRY[name]}" for name in sorted(REGISTRY)]
    lines.append("bundled experiments:")
    lines += [f"  {name}" for name in sorted(bundled_configs())]
    return "\n".join(lines) + "\n"


def _summary(report: dict) -> str:
    keys = ("experiment", "status", "condition", "R1", "R_P", "h_K", "h_0", "case", "existence")
    parts = [f"{k}={report[k]}" for k in keys if k in report]
    if "orbit_witnesses" in report:
        parts.append(f"orbit_witnesses={len(report['orbit_witnesses'])}")
    if "error" in report:
        parts.append(f"error={report['error']}")
    return " ".join(parts)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="conley-resonance", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("run", "full pipeline: conditions, indices, criterion and orbit search"),
        ("check", "conditions, isolating block and indices only"),
        ("orbit", "orbit search only"),
    ):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("config", help="config file or bundled experiment name")
        sp.add_argument("--out", type=Path, default=None, help="artifact directory (default ./out/<name>)")
        sp.add_argument("--seed", type=int, default=None, help="override [checks] seed")
        sp.add_argument("--no-timestamp", action="store_true", help="omit the timestamp from the report")
        sp.add_argument("--json", action="store_true", help="print the full report instead of a summary")
    sub.add_parser("list", help="list built-in nonlinearities and bundled experiments")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list":
        sys.stdout.write(list_registry())
        return 0
    try:
        cfg = load_config(args.config)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    out = args.out if args.out is not None else Path("out") / cfg.name
    mode = {"run": "run", "check": "check", "orbit": "orbit"}[args.command]
    code, report = run_experiment(cfg, out, mode=mode, timestamp=not args.no_timestamp)
    sys.stdout.write(emit(report) if args.json else _summary(report) + "\n")
    if code:
        print(f"exit {code}: {report.get('error', report.get('status'))}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
