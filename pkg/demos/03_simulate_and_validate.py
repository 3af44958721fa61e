"""Simulating a full assignment and checking the resulting schedule.

A seeded desk warehouse, a random task assignment, the event timeline, the
four objectives and an independent validation pass.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from rmfsplan.layouts import desk_scenario
from rmfsplan.search import random_chromosome
from rmfsplan.simulation import Assignment, schedule_from_rows, simulate, validate_schedule
from rmfsplan.warehouse import dump_scenario

scenario = desk_scenario(3, 10, 10, 6, 3)
print(dump_scenario(scenario))

# %% Split six tasks over three AGVs at random.
rng = np.random.default_rng(0)
agvs = [a.id for a in scenario.agvs]
x = random_chromosome(rng, [t.id for t in scenario.tasks], len(agvs))
assignment = Assignment.from_sections(agvs, x.section1, x.section2)
print("assignment:", assignment.to_json())

# %% G1 is total completion time, G2 the makespan, G3 total energy and G4
# the largest energy bill of a single AGV.
schedule, obj = simulate(assignment, scenario)
print("objectives:", obj.to_json())
print("\n".join(schedule.to_csv().splitlines()[:8]), "\n...")

# %% The validator replays the timeline without trusting the planner.
print("violations:", validate_schedule(schedule, scenario))

# %% Cutting the first pick short is caught as a dwell violation.
rows = schedule.rows[agvs[0]]
i = next(k for k, r in enumerate(rows) if r.activity == "pick")
short = rows[:i] + [dataclasses.replace(r, tick=r.tick - 1) for r in rows[i + 1 :]]
broken = schedule_from_rows({**schedule.rows, agvs[0]: short}, scenario)
for v in validate_schedule(broken, scenario):
    print(f"  {v.family}: {v.message}")
