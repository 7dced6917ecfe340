"""Command-line entry point.

Subcommands::

    softlimb run       [--cell ALGO:SETTING:SEED]   train the full grid (or one cell)
    softlimb baseline                                run only the Brownian baseline cells
    softlimb report                                  tables, curves and significance tests
    softlimb check                                   oracle/invariant suite

Exit status is 0 on success, 1 when a cell (or check) failed and 2 for
configuration errors.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .checks import run_all
from .errors import ConfigError, InvalidInputError, MissingDataError
from .kinematics import LimbModel
from .runner import (CellSpec, default_parallelism, load_plan, report, run_cell, run_plan)

EXIT_OK, EXIT_FAILED, EXIT_CONFIG = 0, 1, 2

log = logging.getLogger("softlimb")


def _cell_spec(text: str) -> CellSpec:
    try:
        return CellSpec.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None,
                        help="INI file layered over the packaged defaults")
    common.add_argument("--out", type=Path, default=Path("runs"), help="output directory (default: runs)")
    common.add_argument("--base-seed", type=int, default=None, help="override [plan] base_seed")
    common.add_argument("--baseline-seeds", type=int, default=None,
                        help="number of seeds per baseline cell (default from [plan])")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="softlimb", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", parents=[common], help="run the experiment grid or a single cell")
    run.add_argument("--cell", type=_cell_spec, default=None, metavar="ALGO:SETTING:SEED",
                     help="run one cell with an explicit seed instead of the plan")
    run.add_argument("--parallel", type=int, default=default_parallelism(),
                     help="worker processes (default: hardware threads, at most 10)")
    run.add_argument("--no-report", action="store_true", help="skip the report after a full run")

    base = sub.add_parser("baseline", parents=[common], help="run the baseline cells only")
    base.add_argument("--parallel", type=int, default=default_parallelism())

    rep = sub.add_parser("report", parents=[common], help="summarize finished runs")
    rep.add_argument("--alpha", type=float, default=0.01, help="family-wise significance level")

    sub.add_parser("check", parents=[common], help="run the oracle and invariant suite")
    return parser


def _print_report(out: Path) -> None:
    table = (out / "report" / "table.csv").read_text()
    print(table, end="")
    print((out / "report" / "significance.txt").read_text(), end="")


def cmd_run(args) -> int:
    parser, plan = load_plan(args.config, args.out, args.base_seed, args.baseline_seeds)
    if args.cell is not None:
        status = run_cell(args.cell, parser, plan.out_dir, plan.baseline_episodes)
        print(f"{args.cell.key}: {status.status}" + (f" ({status.error})" if status.error else ""))
        return EXIT_OK if status.status == "done" else EXIT_FAILED
    manifest = run_plan(plan, parser, parallel=max(1, args.parallel))
    if manifest.failed:
        print("failed cells: " + ", ".join(manifest.failed), file=sys.stderr)
        return EXIT_FAILED
    if not args.no_report:
        report(plan.out_dir, plan=plan)
        _print_report(plan.out_dir)
    return EXIT_OK


def cmd_baseline(args) -> int:
    parser, plan = load_plan(args.config, args.out, args.base_seed, args.baseline_seeds)
    cells = plan.cells(include_learners=False)
    manifest = run_plan(plan, parser, parallel=max(1, args.parallel), cells=cells)
    failed = [c.key for c in cells if c.key in manifest.failed]
    for c in cells:
        print(f"{c.key}: {manifest.cells[c.key].status}")
    return EXIT_FAILED if failed else EXIT_OK


def cmd_report(args) -> int:
    _, plan = load_plan(args.config, args.out, args.base_seed, args.baseline_seeds)
    report(plan.out_dir, alpha=args.alpha)
    _print_report(plan.out_dir)
    return EXIT_OK


def cmd_check(args) -> int:
    parser, _ = load_plan(args.config, args.out)
    results = run_all(LimbModel.from_config(parser))
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}: {r.detail}")
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAILED


COMMANDS = {"run": cmd_run, "baseline": cmd_baseline, "report": cmd_report, "check": cmd_check}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (MissingDataError, InvalidInputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
