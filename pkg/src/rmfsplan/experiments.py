"""Batch experiments: random task sets, search runs, HV and CSS tables.

A plan file is JSON::

    {
      "layout": "desk",            # or "full", or "scenario": "<path>"
      "task_counts": [8],
      "agv_counts": [3],
      "repetitions": 2,
      "budget": "200",             # evaluations, "30s", or "200/30s"
      "seed": 7,
      "algorithms": ["nsga2_improved", "nsga2_bench", "alns_improved", "alns_bench", "oracle"],
      "priority_modes": ["energy"] # optional; forces the mode for every search
    }

For every (task count, AGV count, repetition) a task set and AGV starts are
drawn on the layout, each algorithm runs on it, and all fronts of that
instance share one reference point (componentwise max times 1.1).
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .layouts import desk_scenario, full_grid, random_scenario
from .metrics import css, hypervolume, ideal_point, normalized_hypervolume, reference_point
from .oracle import dump_front_json, refined_pareto
from .priority import PRIORITY_MODES
from .search.alns import AlnsParams, alns_run
from .search.evaluation import Budget, InvalidParams
from .search.nsga2 import BENCH, IMPROVED, NsgaParams, nsga2_run
from .search.pareto import ParetoArchive
from .simulation import Assignment, simulate
from .warehouse import Scenario, read_scenario

ALGORITHMS = ("alns_bench", "alns_improved", "nsga2_bench", "nsga2_improved", "oracle")


@dataclass(frozen=True)
class ExperimentPlan:
    task_counts: tuple[int, ...] = (8,)
    agv_counts: tuple[int, ...] = (3,)
    repetitions: int = 1
    budget: Budget = field(default_factory=lambda: Budget(evaluations=200))
    seed: int = 0
    algorithms: tuple[str, ...] = ("nsga2_improved", "nsga2_bench")
    priority_modes: tuple[str, ...] = ()
    layout: str = "desk"
    scenario: str | None = None
    workers: int = 1

    def __post_init__(self):
        if self.repetitions < 1:
            raise InvalidParams("repetitions must be at least 1")
        unknown = set(self.algorithms) - set(ALGORITHMS)
        if unknown:
            raise InvalidParams(f"unknown algorithms {sorted(unknown)}")
        bad_modes = set(self.priority_modes) - set(PRIORITY_MODES)
        if bad_modes:
            raise InvalidParams(f"unknown priority modes {sorted(bad_modes)}")
        if self.scenario is None and self.layout not in ("desk", "full"):
            raise InvalidParams(f"unknown layout {self.layout!r}")

    @classmethod
    def from_json(cls, text: str, base_dir: str = ".") -> ExperimentPlan:
        d = json.loads(text)
        scenario = d.get("scenario")
        if scenario is not None and not os.path.isabs(scenario):
            scenario = os.path.join(base_dir, scenario)
        return cls(
            task_counts=tuple(d.get("task_counts", (8,))),
            agv_counts=tuple(d.get("agv_counts", (3,))),
            repetitions=int(d.get("repetitions", 1)),
            budget=Budget.parse(d.get("budget", "200")),
            seed=int(d.get("seed", 0)),
            algorithms=tuple(d.get("algorithms", ("nsga2_improved", "nsga2_bench"))),
            priority_modes=tuple(d.get("priority_modes", ())),
            layout=d.get("layout", "desk"),
            scenario=scenario,
            workers=int(d.get("workers", 1)),
        )

    def to_dict(self) -> dict:
        return {
            "task_counts": list(self.task_counts),
            "agv_counts": list(self.agv_counts),
            "repetitions": self.repetitions,
            "budget": str(self.budget),
            "seed": self.seed,
            "algorithms": list(self.algorithms),
            "priority_modes": list(self.priority_modes),
            "layout": self.layout,
            "scenario": os.path.basename(self.scenario) if self.scenario else None,
        }


def derived_seed(*parts: int) -> int:
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


def instance_scenario(plan: ExperimentPlan, n_tasks: int, n_agvs: int, rep: int) -> Scenario:
    seed = derived_seed(plan.seed, n_tasks, n_agvs, rep)
    name = f"T{n_tasks}_V{n_agvs}_r{rep}"
    if plan.scenario is not None:
        base = read_scenario(plan.scenario)
        return random_scenario(np.random.default_rng(seed), base.grid, n_tasks, n_agvs, base.timing, base.energy, name)
    if plan.layout == "full":
        return random_scenario(np.random.default_rng(seed), full_grid(), n_tasks, n_agvs, name=name)
    s = desk_scenario(seed, 12, 12, n_tasks, n_agvs)
    return replace(s, name=name)


def run_algorithm(name: str, scenario: Scenario, budget: Budget, seed: int, mode: str | None = None, log=None):
    """Run one algorithm; returns a list of ``(Assignment, ObjectiveVector)``."""
    agv_ids = [a.id for a in scenario.agvs]
    if name == "oracle":
        archive = refined_pareto(scenario, mode or PRIORITY_MODES[0])
        return archive.sorted_entries()
    family, variant = name.split("_")
    variant = IMPROVED if variant == "improved" else BENCH
    if family == "nsga2":
        archive = nsga2_run(scenario, NsgaParams(budget=budget, variant=variant, priority_mode=mode), seed, log)
    else:
        archive = alns_run(scenario, AlnsParams(budget=budget, variant=variant, priority_mode=mode), seed, log)
    return [(Assignment.from_sections(agv_ids, x.section1, x.section2), o) for x, o in archive.sorted_entries()]


def _job(args):
    plan, n_tasks, n_agvs, rep, label, algorithm, mode, seed = args
    scenario = instance_scenario(plan, n_tasks, n_agvs, rep)
    try:
        return label, run_algorithm(algorithm, scenario, plan.budget, seed, mode), None
    except Exception as exc:  # recorded in the report; the plan carries on
        return label, None, f"{type(exc).__name__}: {exc}"


def _labels(plan: ExperimentPlan):
    for i, alg in enumerate(plan.algorithms):
        if plan.priority_modes:
            for mode in plan.priority_modes:
                yield i, f"{alg}@{mode}", alg, mode
        else:
            yield i, alg, alg, None


def _fmt(v: float) -> str:
    return repr(float(v))


def run_plan(plan: ExperimentPlan, out_dir: str) -> dict:
    """Execute a plan and write report.json, hv_table.csv, css_matrix.csv and per-run fronts."""
    os.makedirs(out_dir, exist_ok=True)
    jobs = []
    for n_tasks in plan.task_counts:
        for n_agvs in plan.agv_counts:
            for rep in range(plan.repetitions):
                for i, label, alg, mode in _labels(plan):
                    seed = derived_seed(plan.seed, n_tasks, n_agvs, rep, i)
                    jobs.append((plan, n_tasks, n_agvs, rep, label, alg, mode, seed))
    if plan.workers > 1:
        with ProcessPoolExecutor(plan.workers) as pool:
            results = list(pool.map(_job, jobs))
    else:
        results = [_job(j) for j in jobs]

    runs, instances = [], {}
    for job, (label, front, error) in zip(jobs, results):
        _, n_tasks, n_agvs, rep, *_ = job
        instances.setdefault((n_tasks, n_agvs, rep), {})[label] = (front, error)

    hv_acc: dict[tuple[int, int], dict[str, list[tuple[float, float]]]] = {}
    css_acc: dict[tuple[int, int], dict[tuple[str, str], list[float]]] = {}
    for (n_tasks, n_agvs, rep), by_label in sorted(instances.items()):
        ok = {lab: f for lab, (f, err) in by_label.items() if f}
        pts = {lab: [o.as_tuple() for _, o in f] for lab, f in ok.items()}
        ref = reference_point(pts.values()) if pts else None
        ideal = ideal_point(pts.values()) if pts else None
        run_dir = os.path.join(out_dir, "runs", f"T{n_tasks}_V{n_agvs}_r{rep}")
        scenario = instance_scenario(plan, n_tasks, n_agvs, rep)
        for label, (front, error) in sorted(by_label.items()):
            rec = {"tasks": n_tasks, "agvs": n_agvs, "repetition": rep, "algorithm": label}
            if front is None or not front:
                rec.update(status="failed", error=error or "empty front")
                runs.append(rec)
                continue
            d = os.path.join(run_dir, label)
            os.makedirs(d, exist_ok=True)
            with open(os.path.join(d, "front.json"), "w", encoding="utf-8") as fh:
                fh.write(dump_front_json(ParetoArchive(list(front))))
            best = min(front, key=lambda e: e[1].as_tuple())[0]
            mode = label.split("@")[1] if "@" in label else ("energy" if "improved" in label or label == "oracle" else "earliest-arrival")
            sched, _ = simulate(best, scenario, mode)
            with open(os.path.join(d, "events.csv"), "w", encoding="utf-8") as fh:
                fh.write(sched.to_csv())
            raw = hypervolume(pts[label], ref)
            norm = normalized_hypervolume(pts[label], ref, ideal)
            rec.update(
                status="ok",
                front_size=len(front),
                hv=raw,
                hv_normalized=norm,
                reference_point=[float(v) for v in ref],
                ideal_point=[float(v) for v in ideal],
                front_file=os.path.relpath(os.path.join(d, "front.json"), out_dir),
            )
            runs.append(rec)
            hv_acc.setdefault((n_tasks, n_agvs), {}).setdefault(label, []).append((raw, norm))
        for a in sorted(pts):
            for b in sorted(pts):
                if a != b:
                    css_acc.setdefault((n_tasks, n_agvs), {}).setdefault((a, b), []).append(css(pts[a], pts[b]))

    hv_rows = []
    for (n_tasks, n_agvs), by_label in sorted(hv_acc.items()):
        for label, vals in sorted(by_label.items()):
            raw = float(np.mean([v[0] for v in vals]))
            norm = float(np.mean([v[1] for v in vals]))
            hv_rows.append({"tasks": n_tasks, "agvs": n_agvs, "algorithm": label, "mean_hv": raw, "mean_hv_normalized": norm, "runs": len(vals)})
    css_rows = []
    for (n_tasks, n_agvs), pairs in sorted(css_acc.items()):
        for (a, b), vals in sorted(pairs.items()):
            css_rows.append({"tasks": n_tasks, "agvs": n_agvs, "row": a, "col": b, "css": float(np.mean(vals))})

    report = {"plan": plan.to_dict(), "runs": runs, "hv_table": hv_rows, "css_matrix": css_rows}
    with open(os.path.join(out_dir, "report.json"), "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(os.path.join(out_dir, "hv_table.csv"), "w", encoding="utf-8") as fh:
        fh.write(_csv(["tasks", "agvs", "algorithm", "mean_hv", "mean_hv_normalized", "runs"], hv_rows))
    with open(os.path.join(out_dir, "css_matrix.csv"), "w", encoding="utf-8") as fh:
        fh.write(_csv(["tasks", "agvs", "row", "col", "css"], css_rows))
    with open(os.path.join(out_dir, "summary.md"), "w", encoding="utf-8") as fh:
        fh.write(summary_markdown(hv_rows))
    return report


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(r[h]) if isinstance(r[h], float) else r[h] for h in header])
    return buf.getvalue()


def summary_markdown(hv_rows) -> str:
    """One table row per instance size; the best normalized HV of each row is bold."""
    labels = sorted({r["algorithm"] for r in hv_rows})
    groups: dict[tuple[int, int], dict[str, float]] = {}
    for r in hv_rows:
        groups.setdefault((r["tasks"], r["agvs"]), {})[r["algorithm"]] = r["mean_hv_normalized"]
    lines = ["| T | V | " + " | ".join(labels) + " |", "|---|---|" + "---|" * len(labels)]
    for (t, v), vals in sorted(groups.items()):
        best = max(vals.values())
        cells = []
        for lab in labels:
            if lab not in vals:
                cells.append("-")
            elif math.isclose(vals[lab], best):
                cells.append(f"**{vals[lab]:.4f}**")
            else:
                cells.append(f"{vals[lab]:.4f}")
        lines.append(f"| {t} | {v} | " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def priority_comparison(scenario: Scenario, samples: int = 50, seed: int = 0) -> dict:
    """Both priority rules on the same random assignments, scored by HV.

    ``samples`` random assignments are simulated under each rule; each rule's
    non-dominated outcomes form its front and both fronts share one
    reference point.
    """
    from .search.chromosome import random_chromosome

    rng = np.random.default_rng(seed)
    task_ids = [t.id for t in scenario.tasks]
    agv_ids = [a.id for a in scenario.agvs]
    fronts = {m: ParetoArchive() for m in PRIORITY_MODES}
    means = {m: [] for m in PRIORITY_MODES}
    for _ in range(samples):
        x = random_chromosome(rng, task_ids, len(agv_ids), len(task_ids) >= len(agv_ids))
        a = Assignment.from_sections(agv_ids, x.section1, x.section2)
        for m in PRIORITY_MODES:
            _, obj = simulate(a, scenario, m)
            fronts[m].add(a, obj)
            means[m].append(obj.as_tuple())
    pts = {m: f.points() for m, f in fronts.items()}
    ref = reference_point(pts.values())
    ideal = ideal_point(pts.values())
    return {
        m: {
            "hv": hypervolume(pts[m], ref),
            "hv_normalized": normalized_hypervolume(pts[m], ref, ideal),
            "mean_objectives": [float(v) for v in np.mean(means[m], axis=0)],
        }
        for m in PRIORITY_MODES
    }
