"""Command-line entry point: ``entropic-lab <command> <file.json> [--out DIR] [--seed N] [--quiet]``.

Exit codes: 0 success, 1 runtime error, 2 infeasible / overconstrained,
3 validation failure (bad config, bad input file, or a failed declared check).
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path


from .expr import ExpressionError
from .io import SnapshotError
from .measurement import MeasurementError
from .scenario import COMMANDS, InfeasibleError, ScenarioError, run_maxent, run_scenario

EXIT_OK, EXIT_RUNTIME, EXIT_INFEASIBLE, EXIT_INVALID = 0, 1, 2, 3


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="entropic-lab",
                                description="Entropic-dynamics numerical laboratory.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("maxent", "solve a maximum-entropy problem"),
        ("evolve", "Crank-Nicolson evolution with diagnostics"),
        ("sample", "trajectory ensemble against |psi|^2"),
        ("symmetry", "moving-frame symmetry check"),
        ("gauge-check", "gauge-pair evolutions"),
        ("measure", "measurement device, Born rule and filtering"),
        ("classical-limit", "centre-of-mass fluctuations and Hamilton-Jacobi gap"),
        ("uncertainty", "momentum variance identity and uncertainty products"),
    ]:
        s = sub.add_parser(name, help=help_text)
        s.add_argument("config", type=Path, help="problem or scenario JSON file")
        s.add_argument("--out", type=Path, default=None, help="output directory")
        if name != "maxent":
            s.add_argument("--seed", type=int, default=None, help="override the scenario seed")
        s.add_argument("--quiet", action="store_true", help="suppress the report on stdout")
    return p


def _report(summary: dict, quiet: bool) -> None:
    if quiet:
        return
    checks = summary.get("checks", {})
    for name, c in checks.items():
        mark = "ok  " if c["passed"] else "FAIL"
        print(f"{mark} {name}: value={c['value']} tolerance={c['tolerance']}")
    if "classification" in summary:
        print(f"classification: {summary['classification']}")


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    out = args.out or Path("runs") / f"{args.config.stem}-{args.command}"
    try:
        if args.command == "maxent":
            summary = run_maxent(args.config, out)
        else:
            summary = run_scenario(args.command, args.config, out, args.seed)
    except InfeasibleError as exc:
        print(f"{args.config}: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ScenarioError, ExpressionError, SnapshotError, MeasurementError) as exc:
        print(f"{args.config}: invalid: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # any module failure surfaces as a runtime error
        print(f"{args.config}: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    _report(summary, args.quiet)
    if not args.quiet:
        print(f"outputs in {out}")
    if summary.get("checks") and not summary.get("passed", True):
        return EXIT_INVALID
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
