"""Command-line entry point: ``d2dcache run|verify|greedy-trace``."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional, Sequence

from ..placement import BaselineUnstableError
from .config import ConfigError, load_scenario
from .runner import OUTPUT_ENV, greedy_trace_csv, greedy_trace_for, run_scenario
from .verify import verify_suite

EXIT_OK, EXIT_CONFIG, EXIT_VERIFY = 0, 1, 2

SCENARIO_DIR = Path(__file__).with_name("scenarios")


def _resolve(name: str) -> Path:
    """A path, or the stem of a bundled scenario such as ``fig4``."""
    p = Path(name)
    if p.exists():
        return p
    bundled = SCENARIO_DIR / (name if name.endswith(".scenario") else name + ".scenario")
    return bundled if bundled.exists() else p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="d2dcache",
        description="Cooperative D2D cluster caching: scenario runs and model verification.",
        epilog=f"CSV files go to <base>/<scenario name>, where <base> is --output-dir, "
               f"else ${OUTPUT_ENV}, else ./results.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="evaluate a scenario and write CSV files")
    run.add_argument("scenario", help="scenario file or bundled name (e.g. fig4)")
    run.add_argument("-o", "--output-dir", help="base directory for CSV output")
    run.add_argument("-j", "--workers", type=int, help="parallel worker processes")

    ver = sub.add_parser("verify", help="run the oracle and property checks")
    ver.add_argument("--quick", action="store_true", help="smaller sample sizes")
    ver.add_argument("--json", action="store_true", help="print a JSON report")

    tr = sub.add_parser("greedy-trace", help="print the greedy placement steps as CSV")
    tr.add_argument("scenario")
    tr.add_argument("-o", "--output", help="write to this file instead of stdout")

    sub.add_parser("list", help="list bundled scenarios")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list":
        for p in sorted(SCENARIO_DIR.glob("*.scenario")):
            print(p.stem)
        return EXIT_OK
    if args.command == "verify":
        report = verify_suite(quick=args.quick)
        if args.json:
            print(report.to_json())
        else:
            for c in report.checks:
                print(c.line())
            print("overall:", "PASS" if report.passed else "FAIL")
        return EXIT_OK if report.passed else EXIT_VERIFY
    try:
        scenario = load_scenario(_resolve(args.scenario))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "run":
        if args.workers is not None and args.workers < 1:
            print("config error: --workers must be >= 1", file=sys.stderr)
            return EXIT_CONFIG
        result = run_scenario(scenario, args.output_dir, args.workers)
        for path in result.files:
            print(f"wrote {path}")
        for line in result.summary:
            print(line)
        return EXIT_OK
    try:
        trace = greedy_trace_for(scenario)
    except BaselineUnstableError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    text = greedy_trace_csv(trace)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
