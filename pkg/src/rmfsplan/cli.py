"""Command-line entry point ``rmfs``.

    rmfs plan run <plan.json>                  batch experiment
    rmfs oracle <scenario>                     exact front of a small instance
    rmfs search <scenario> --algorithm NAME    one search run
    rmfs simulate <scenario> <assignment.json> execute one assignment
    rmfs validate <schedule.csv> --scenario S  check a schedule

Every command writes its files under ``--out-dir`` (default ``out``).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .experiments import ALGORITHMS, ExperimentPlan, run_algorithm, run_plan
from .oracle import dump_front_json, refined_pareto
from .priority import PRIORITY_MODES, dump_decisions_csv
from .search.evaluation import Budget, InvalidParams, dump_log_jsonl
from .search.pareto import ParetoArchive
from .simulation import Assignment, Schedule, SimulationStuck, simulate, validate_schedule
from .warehouse import ScenarioError, read_scenario


def _common(p: argparse.ArgumentParser, budget: bool = False) -> None:
    p.add_argument("--seed", type=int, default=None, help="random seed")
    p.add_argument("--out-dir", default="out", help="directory for output files")
    p.add_argument("--workers", type=int, default=None, help="parallel worker processes")
    if budget:
        p.add_argument("--budget", default=None, help='evaluations ("200"), seconds ("30s") or both ("200/30s")')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rmfs", description="AGV task assignment and routing experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    plan = sub.add_parser("plan", help="experiment plans")
    plan_sub = plan.add_subparsers(dest="plan_command", required=True)
    run = plan_sub.add_parser("run", help="execute an experiment plan")
    run.add_argument("plan_file")
    _common(run, budget=True)

    oracle = sub.add_parser("oracle", help="exact Pareto front by enumeration")
    oracle.add_argument("scenario")
    oracle.add_argument("--priority", choices=PRIORITY_MODES, default=PRIORITY_MODES[0])
    _common(oracle)

    search = sub.add_parser("search", help="run one search algorithm")
    search.add_argument("scenario")
    search.add_argument("--algorithm", choices=[a for a in ALGORITHMS if a != "oracle"], default="nsga2_improved")
    _common(search, budget=True)

    sim = sub.add_parser("simulate", help="simulate one assignment")
    sim.add_argument("scenario")
    sim.add_argument("assignment_file")
    sim.add_argument("--priority", choices=PRIORITY_MODES, default=PRIORITY_MODES[0])
    _common(sim)

    val = sub.add_parser("validate", help="check a schedule CSV against a scenario")
    val.add_argument("schedule_file")
    val.add_argument("--scenario", required=True)
    return parser


def _write(path: str, text: str) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def cmd_plan_run(args) -> int:
    with open(args.plan_file, encoding="utf-8") as fh:
        plan = ExperimentPlan.from_json(fh.read(), os.path.dirname(os.path.abspath(args.plan_file)))
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.budget is not None:
        overrides["budget"] = Budget.parse(args.budget)
    if args.workers is not None:
        overrides["workers"] = args.workers
    if overrides:
        plan = ExperimentPlan(**{**plan.__dict__, **overrides})
    report = run_plan(plan, args.out_dir)
    failed = [r for r in report["runs"] if r["status"] != "ok"]
    print(f"{len(report['runs'])} runs, {len(failed)} failed; report in {os.path.join(args.out_dir, 'report.json')}")
    with open(os.path.join(args.out_dir, "summary.md"), encoding="utf-8") as fh:
        print(fh.read(), end="")
    return 0


def cmd_oracle(args) -> int:
    scenario = read_scenario(args.scenario)
    stages: dict = {}
    front = refined_pareto(scenario, args.priority, stages=stages)
    _write(os.path.join(args.out_dir, "front.json"), dump_front_json(front))
    _write(os.path.join(args.out_dir, "report.json"), json.dumps({"stages": stages, "priority": args.priority}, indent=2, sort_keys=True) + "\n")
    print(" ".join(f"{k}={v}" for k, v in sorted(stages.items())))
    return 0


def cmd_search(args) -> int:
    scenario = read_scenario(args.scenario)
    budget = Budget.parse(args.budget or "200")
    log: list = []
    entries = run_algorithm(args.algorithm, scenario, budget, args.seed or 0, log=log)
    archive = ParetoArchive(list(entries))
    _write(os.path.join(args.out_dir, "front.json"), dump_front_json(archive))
    _write(os.path.join(args.out_dir, "run_log.jsonl"), dump_log_jsonl(log))
    print(f"{len(archive)} non-dominated assignments")
    return 0


def cmd_simulate(args) -> int:
    scenario = read_scenario(args.scenario)
    with open(args.assignment_file, encoding="utf-8") as fh:
        assignment = Assignment.from_json(fh.read())
    try:
        schedule, obj = simulate(assignment, scenario, args.priority)
    except SimulationStuck as exc:
        print(f"simulation stuck: {exc}", file=sys.stderr)
        for line in exc.trace:
            print(f"  {line}", file=sys.stderr)
        return 2
    _write(os.path.join(args.out_dir, "events.csv"), schedule.to_csv())
    _write(os.path.join(args.out_dir, "objectives.json"), obj.to_json() + "\n")
    _write(os.path.join(args.out_dir, "decisions.csv"), dump_decisions_csv(schedule.decisions))
    print(obj.to_json())
    return 0


def cmd_validate(args) -> int:
    scenario = read_scenario(args.scenario)
    with open(args.schedule_file, encoding="utf-8") as fh:
        schedule = Schedule.from_csv(fh.read(), scenario)
    violations = validate_schedule(schedule, scenario)
    for v in violations:
        print(f"{v.family}\tagv={v.agv}\ttick={v.tick}\t{v.message}")
    print(f"{len(violations)} violations")
    return 1 if violations else 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "plan":
            return cmd_plan_run(args)
        return {"oracle": cmd_oracle, "search": cmd_search, "simulate": cmd_simulate, "validate": cmd_validate}[args.command](args)
    except (ScenarioError, InvalidParams, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
