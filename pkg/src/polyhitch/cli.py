"""Command-line entry point: ``polyhitch <verb> --scenario FILE [--out DIR]``.

Exit codes: 0 success, 1 validation failure, 2 planning or simulation
infeasibility, 3 I/O error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
import warnings
from pathlib import Path

from .actions import ClearanceWarning, PlanningError
from .hitch import InfeasibleCableError
from .io import (
    PipelineError,
    ScenarioError,
    build_plan,
    bundled_scenario_path,
    export,
    load_scenario,
    run_pipeline,
    write_outputs,
)
from .simulator import InfeasiblePlanError, simulate

log = logging.getLogger("polyhitch")

EXIT_OK, EXIT_INVALID, EXIT_INFEASIBLE, EXIT_IO = 0, 1, 2, 3


def _resolve(path: str) -> Path:
    p = Path(path)
    if p.exists():
        return p
    bundled = bundled_scenario_path(p.name)
    if bundled.exists():
        return bundled
    return p


def _load(args):
    scenario = load_scenario(_resolve(args.scenario))
    if args.seed is not None:
        scenario = dataclasses.replace(scenario, seed=args.seed)
    if args.sample_rate is not None:
        scenario = dataclasses.replace(
            scenario, params=dataclasses.replace(scenario.params, sample_rate=args.sample_rate)
        )
    return scenario


def _cmd_validate(args) -> int:
    scenario = _load(args)
    print(json.dumps(scenario.to_dict(), indent=1))
    return EXIT_OK


def _cmd_plan(args) -> int:
    scenario = _load(args)
    plan, _ = build_plan(scenario)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    print(export(plan, out / "plan.json"))
    return EXIT_OK


def _cmd_simulate(args) -> int:
    scenario = _load(args)
    plan, _ = build_plan(scenario)
    trace = simulate(plan)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    print(export(plan, out / "plan.json"))
    print(export(trace, out / "trace.csv"))
    if trace.failed:
        log.warning("%d samples failed to converge", trace.failed)
    return EXIT_OK


def _run_one(scenario, out, which) -> None:
    result = run_pipeline(scenario)
    for p in write_outputs(result, scenario, out, which):
        print(p)
    for s in result.stats:
        log.info("p%d: mean %.6g m, std %.6g m over %d samples", s.vertex, s.mean, s.std, s.count)


def _cmd_metrics(args) -> int:
    _run_one(_load(args), Path(args.out), ("metrics",))
    return EXIT_OK


def _cmd_run(args) -> int:
    src = Path(args.scenario)
    if src.is_dir():
        for f in sorted(src.glob("*.json")):
            args.scenario = str(f)
            _run_one(_load(args), Path(args.out) / f.stem, ("plan", "trace", "metrics", "scenario"))
        return EXIT_OK
    _run_one(_load(args), Path(args.out), ("plan", "trace", "metrics", "scenario"))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", required=True, help="scenario JSON (or a bundled scenario name)")
    common.add_argument("--out", default="out", help="output directory (default: out)")
    common.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    common.add_argument("--sample-rate", type=float, default=None, help="override params.sample_rate (Hz)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="polyhitch", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, help_ in (
        ("validate", _cmd_validate, "check a scenario and print it with defaults resolved"),
        ("plan", _cmd_plan, "write plan.json"),
        ("simulate", _cmd_simulate, "write plan.json and trace.csv"),
        ("metrics", _cmd_metrics, "write errors.csv, stats.csv and final_tails.csv"),
        ("run", _cmd_run, "full pipeline; --scenario may be a directory"),
    ):
        p = sub.add_parser(name, parents=[common], help=help_)
        p.set_defaults(func=fn)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    warnings.simplefilter("ignore", ClearanceWarning)
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"invalid scenario: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (PipelineError, PlanningError, InfeasiblePlanError, InfeasibleCableError) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
