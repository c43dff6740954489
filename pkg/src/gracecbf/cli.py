"""Command-line interface: list, run, and verify the bundled scenarios.

Exit codes: 0 on success, 1 when an expectation or verification check fails,
2 on usage errors (including unknown scenario ids).
"""

from __future__ import annotations

import argparse
import sys
from typing import List, Optional

from .runner import format_summary, load_config, run_scenario, verify_all, verify_scenario
from .scenarios import UnknownScenario, registry
from .sim import HAVE_FAST_KERNEL


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gracecbf",
        description="Wall collision-avoidance benchmark for barrier-based safety filters.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("list", help="list bundled scenarios")

    def add_run_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--x0", type=float, action="append", help="initial position override (repeatable)")
        p.add_argument("--v0", type=float, help="initial velocity override (second-order plants)")
        p.add_argument("--out", help="output directory for CSVs and the summary report")
        p.add_argument("--rtol", type=float, help="relative tolerance override")
        p.add_argument("--atol", type=float, help="absolute tolerance override")
        p.add_argument("--horizon", type=float, help="horizon override, seconds")
        p.add_argument("--config", help="key = value sections file with per-scenario overrides")
        p.add_argument("--no-kernel", action="store_true", help="force the pure-Python stepper")

    run_p = sub.add_parser("run", help="run one scenario and write CSV artifacts")
    run_p.add_argument("scenario", help="scenario id")
    add_run_flags(run_p)

    verify_p = sub.add_parser("verify", help="run a scenario (or all) and check its expectations")
    verify_p.add_argument("scenario", help="scenario id or 'all'")
    verify_p.add_argument("--no-kernel", action="store_true", help="force the pure-Python stepper")

    return parser


def _cmd_list() -> int:
    print(f"compiled kernel: {'available' if HAVE_FAST_KERNEL else 'not built (pure-Python fallback)'}")
    for s in registry():
        ics = ", ".join(
            f"({', '.join(f'{v:g}' for v in ic)})" if len(ic) > 1 else f"{ic[0]:g}"
            for ic in s.initial_conditions
        )
        print(f"{s.id:22s} {s.description}; x0 in [{ics}]")
    return 0


def _cmd_run(args) -> int:
    overrides = {}
    if args.config:
        overrides = load_config(args.config).get(args.scenario, {})
    kwargs = dict(
        x0=args.x0 if args.x0 is not None else overrides.get("x0"),
        v0=args.v0 if args.v0 is not None else overrides.get("v0"),
        rtol=args.rtol if args.rtol is not None else overrides.get("rtol"),
        atol=args.atol if args.atol is not None else overrides.get("atol"),
        horizon=args.horizon if args.horizon is not None else overrides.get("horizon"),
        out=args.out if args.out is not None else overrides.get("out", "runs"),
    )
    summary = run_scenario(
        args.scenario, use_kernel=False if args.no_kernel else None, **kwargs
    )
    print(format_summary(summary), end="")
    return 0 if summary.expectations_ok else 1


def _print_report(report) -> None:
    print(f"verify {report.scenario_id}: {'PASS' if report.passed else 'FAIL'}")
    for check in report.checks:
        print(f"  [{'PASS' if check.passed else 'FAIL'}] {check.name}: {check.detail}")


def _cmd_verify(args) -> int:
    use_kernel = False if args.no_kernel else None
    if args.scenario == "all":
        reports = verify_all(use_kernel=use_kernel)
    else:
        reports = [verify_scenario(args.scenario, use_kernel=use_kernel)]
    for report in reports:
        _print_report(report)
    return 0 if all(r.passed for r in reports) else 1


def main(argv: Optional[List[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "list":
            code = _cmd_list()
        elif args.command == "run":
            code = _cmd_run(args)
        else:
            code = _cmd_verify(args)
    except UnknownScenario as exc:
        print(f"error: {exc}", file=sys.stderr)
        code = 2
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        code = 2
    if argv is None:
        sys.exit(code)
    return code


if __name__ == "__main__":
    main()
