from __future__ import annotations

import dataclasses
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rmfsplan.layouts import desk_scenario
from rmfsplan.priority import EARLIEST_ARRIVAL, ENERGY
from rmfsplan.simulation import (
    Assignment,
    InvalidAssignment,
    Schedule,
    schedule_from_rows,
    simulate,
    validate_schedule,
)
from rmfsplan.warehouse import GridMap, step_energy

from .helpers import C, P, A, W, aisle_grid, random_assignment, scenario_from


def single_agent_closed_form(grid: GridMap, start, pod, timing, energy):
    ws = grid.nearest_workstation(pod)
    d1 = grid.travel_distance(start, pod)
    d2 = grid.travel_distance(pod, ws)
    g1 = d1 + timing.pick_dwell + d2 + timing.workstation_dwell + d2 + timing.release_dwell
    g3 = energy.unloaded_j_per_m * d1 + energy.loaded_j_per_m * d2 + energy.unloaded_j_per_m * d2
    return g1, g3


def test_single_agent_closed_form():
    s = scenario_from(aisle_grid(), [(6, 0)], [(0, 3)])
    _, obj = simulate(Assignment({0: (0,)}), s)
    g1, g3 = single_agent_closed_form(s.grid, (0, 3), (6, 0), s.timing, s.energy)
    assert (g1, g3) == (50, 9500)
    assert obj.as_tuple() == (g1, g1, g3, g3)


def corridors_grid() -> GridMap:
    k = np.array(
        [
            [C, P, P, C, C, C, C, C, P, P, C],
            [C, A, A, C, C, C, C, C, A, A, C],
            [C, C, C, C, C, C, C, C, C, C, C],
            [C, W, C, C, C, C, C, C, C, W, C],
        ]
    )
    return GridMap(k)


def test_disjoint_corridors_add_up():
    g = corridors_grid()
    both = scenario_from(g, [(1, 0), (9, 0)], [(0, 2), (10, 2)])
    _, obj = simulate(Assignment({0: (0,), 1: (1,)}), both)
    left = single_agent_closed_form(g, (0, 2), (1, 0), both.timing, both.energy)
    right = single_agent_closed_form(g, (10, 2), (9, 0), both.timing, both.energy)
    assert obj.G1 == left[0] + right[0]
    assert obj.G2 == max(left[0], right[0])
    assert obj.G3 == left[1] + right[1]


def test_simulated_schedule_is_valid_and_exports():
    s = desk_scenario(3)
    a = random_assignment(s, np.random.default_rng(0))
    sched, obj = simulate(a, s)
    assert validate_schedule(sched, s) == []
    again = Schedule.from_csv(sched.to_csv(), s)
    assert again.objectives() == obj
    assert validate_schedule(again, s) == []
    assert json.loads(obj.to_json()) == dict(zip(("G1", "G2", "G3", "G4"), obj.as_tuple()))


def test_seeded_dwell_fault():
    s = scenario_from(aisle_grid(), [(6, 0)], [(0, 3)])
    sched, _ = simulate(Assignment({0: (0,)}), s)
    rows = sched.rows[0]
    first_pick = next(i for i, r in enumerate(rows) if r.activity == "pick")
    short = rows[:first_pick] + [dataclasses.replace(r, tick=r.tick - 1) for r in rows[first_pick + 1 :]]
    violations = validate_schedule(schedule_from_rows({0: short}, s), s)
    assert [v.family for v in violations] == ["dwell"]
    assert "7 < 8" in violations[0].message


def test_seeded_collision_fault():
    g = aisle_grid()
    alone = scenario_from(g, [(6, 0)], [(0, 3)])
    sched, _ = simulate(Assignment({0: (0,)}), alone)
    # a second AGV standing on a cell the first one passes exactly once
    cells = [r.cell for r in sched.rows[0]]
    assert cells.count((0, 2)) == 1
    two = scenario_from(g, [(6, 0)], [(0, 3), (0, 2)])
    rows = {0: sched.rows[0], 1: [dataclasses.replace(sched.rows[0][0], agv=1, cell=(0, 2), activity="idle", task=-1)]}
    violations = validate_schedule(schedule_from_rows(rows, two), two)
    assert [v.family for v in violations] == ["collision"]


def test_seeded_ordering_and_assignment_faults():
    s = scenario_from(aisle_grid(), [(6, 0)], [(0, 3)])
    sched, _ = simulate(Assignment({0: (0,)}), s)
    rows = sched.rows[0]
    truncated = [r for r in rows if r.activity != "release"]
    fams = {v.family for v in validate_schedule(schedule_from_rows({0: truncated}, s), s)}
    assert "ordering" in fams and "assignment" in fams
    flipped = [dataclasses.replace(r, loaded=not r.loaded) if r.activity == "pick" else r for r in rows]
    assert {v.family for v in validate_schedule(schedule_from_rows({0: flipped}, s), s)} == {"ordering"}


def test_invalid_assignment_rejected():
    s = scenario_from(aisle_grid(), [(6, 0), (3, 2)], [(0, 3)])
    with pytest.raises(InvalidAssignment):
        simulate(Assignment({0: (0,)}), s)
    with pytest.raises(InvalidAssignment):
        simulate(Assignment({0: (0, 0, 1)}), s)


def test_assignment_json_round_trip():
    a = Assignment({0: (2, 0), 1: (), 2: (1,)})
    assert Assignment.from_json(a.to_json()) == a
    assert Assignment.from_sections([0, 1, 2], [2, 0, 1], [2, 0, 1]) == a


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 100_000), st.sampled_from([ENERGY, EARLIEST_ARRIVAL]))
def test_simulation_output_always_validates(seed, mode):
    s = desk_scenario(seed)
    a = random_assignment(s, np.random.default_rng(seed))
    sched, obj = simulate(a, s, mode)
    assert validate_schedule(sched, s) == []
    assert 0 <= obj.G2 <= obj.G1
    assert 0 <= obj.G4 <= obj.G3
    # each row is priced at the status of the step that ends there
    for agv, rs in sched.rows.items():
        joules = sum(step_energy(r.loaded, r.cell != p.cell, s.energy) for p, r in zip(rs, rs[1:]))
        assert joules == pytest.approx(sched.joules[agv])


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 100_000))
def test_adding_a_task_does_not_reduce_totals(seed):
    s = desk_scenario(seed)
    if len(s.tasks) < 2:
        return
    rng = np.random.default_rng(seed)
    full = random_assignment(s, rng)
    loaded = [a for a, ts in full.per_agv_tasks.items() if ts]
    agv = loaded[int(rng.integers(len(loaded)))]
    dropped = full.per_agv_tasks[agv][-1]
    smaller = Assignment({a: ts[:-1] if a == agv else ts for a, ts in full.per_agv_tasks.items()})
    sub = s.with_tasks(t for t in s.tasks if t.id != dropped)
    _, before = simulate(smaller, sub)
    _, after = simulate(full, s)
    assert after.G1 >= before.G1
    assert after.G3 >= before.G3
