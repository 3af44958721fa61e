"""Exact Pareto front for small instances by enumeration.

Every way of ordering the tasks and cutting the order into one non-empty
group per AGV is scored with a collision-free relaxation. The relaxed front
is then refined with full simulations: its members are simulated, and any
assignment whose relaxed cost is not dominated by those simulated results is
simulated too.
"""

from __future__ import annotations

import json
import math
from itertools import combinations, permutations

from .priority import ENERGY
from .search.pareto import ParetoArchive, dominates
from .simulation import Assignment, ObjectiveVector, SimulationStuck, simulate
from .warehouse import Scenario

DEFAULT_TASK_CAP = 10


class InstanceTooLarge(ValueError):
    pass


def enumeration_size(n_tasks: int, n_agvs: int) -> int:
    return math.factorial(n_tasks) * math.comb(n_tasks - 1, n_agvs - 1)


def enumerate_assignments(tasks, agvs, cap: int = DEFAULT_TASK_CAP) -> list[Assignment]:
    """All ordered splits of every task permutation into non-empty groups, one per AGV."""
    task_ids = sorted(t.id if hasattr(t, "id") else int(t) for t in tasks)
    agv_ids = sorted(a.id if hasattr(a, "id") else int(a) for a in agvs)
    n, m = len(task_ids), len(agv_ids)
    if not n >= m >= 1:
        raise ValueError("need at least as many tasks as AGVs, and one AGV")
    if n > cap:
        raise InstanceTooLarge(f"{n} tasks exceed the enumeration cap of {cap}")
    out = []
    for perm in permutations(task_ids):
        for cuts in combinations(range(1, n), m - 1):
            bounds = (0,) + cuts + (n,)
            out.append(Assignment({a: perm[bounds[i] : bounds[i + 1]] for i, a in enumerate(agv_ids)}))
    return out


def relaxed_cost(assignment: Assignment, scenario: Scenario) -> ObjectiveVector:
    """Collision-free cost of an assignment.

    Each AGV drives start -> pod_1 -> pod_2 -> ... unloaded and, per task,
    makes the round trip to the nearest workstation (loaded out, unloaded
    back), plus all dwell times. Distances are shortest travel distances on
    the grid, so a lone AGV's simulated cost matches exactly.
    """
    grid, timing, energy = scenario.grid, scenario.timing, scenario.energy
    dwell = timing.pick_dwell + timing.workstation_dwell + timing.release_dwell
    times, joules = [], []
    for agv in scenario.agvs:
        tasks = assignment.per_agv_tasks.get(agv.id, ())
        t, e = 0, 0.0
        here = agv.start_cell
        for k in tasks:
            pod = scenario.task_by_id[k].pod_cell
            ws = grid.nearest_workstation(pod)
            d_chain = grid.travel_distance(here, pod)
            d_ws = grid.travel_distance(pod, ws)
            d_back = grid.travel_distance(ws, pod)
            t += d_chain + d_ws + d_back + dwell
            e += energy.unloaded_j_per_m * (d_chain + d_back) + energy.loaded_j_per_m * d_ws
            here = pod
        times.append(t)
        joules.append(e)
    return ObjectiveVector(float(sum(times)), float(max(times)), float(sum(joules)), float(max(joules)))


def _pareto_filter(pairs):
    archive = ParetoArchive()
    for a, o in pairs:
        archive.add(a, o)
    return archive


def refined_pareto(
    scenario: Scenario,
    priority_mode: str = ENERGY,
    cap: int = DEFAULT_TASK_CAP,
    stages: dict | None = None,
) -> ParetoArchive:
    """Three-stage exact front: relaxed filter, simulate, rescan and merge.

    ``stages``, when given, receives the sizes of each stage for reporting.
    """
    assignments = enumerate_assignments(scenario.tasks, scenario.agvs, cap)
    relaxed = [(a, relaxed_cost(a, scenario)) for a in assignments]
    initial = _pareto_filter(relaxed)

    simulated: dict[tuple, ObjectiveVector] = {}

    def run(a: Assignment) -> ObjectiveVector | None:
        key = a.key()
        if key not in simulated:
            try:
                simulated[key] = simulate(a, scenario, priority_mode)[1]
            except SimulationStuck:
                simulated[key] = None
        return simulated[key]

    evaluated = [(a, run(a)) for a, _ in initial.sorted_entries()]
    evaluated = [(a, o) for a, o in evaluated if o is not None]
    initial_keys = {a.key() for a, _ in evaluated}
    extra = [
        a
        for a, r in relaxed
        if a.key() not in initial_keys and not any(dominates(o, r) for _, o in evaluated)
    ]
    extra_eval = [(a, o) for a in extra if (o := run(a)) is not None]
    final = _pareto_filter(evaluated + extra_eval)
    if stages is not None:
        stages.update(
            enumerated=len(assignments),
            initial=len(initial),
            additional=len(extra),
            combined=len(evaluated) + len(extra_eval),
            final=len(final),
        )
    return final


def dump_front_json(archive: ParetoArchive) -> str:
    rows = []
    for a, o in archive.sorted_entries():
        per_agv = a.per_agv_tasks if isinstance(a, Assignment) else a
        rows.append(
            {
                "assignment": {str(k): list(v) for k, v in sorted(per_agv.items())},
                "G1": o.G1,
                "G2": o.G2,
                "G3": o.G3,
                "G4": o.G4,
            }
        )
    return json.dumps(rows, indent=2, sort_keys=True) + "\n"
