"""Priority arbitration between colliding AGVs.

When several AGVs want overlapping space-time, every ordering of the group is
tried: AGVs plan one after another, each respecting the claims of those
before it. An AGV's wasted time is how much later it finishes than it would
with the other group members out of the way; wasted energy prices those ticks
at the AGV's travel rate (loaded or unloaded) at the moment of collision. The
ordering with the least wasted energy wins, then the least wasted time, then
the lexicographically smallest ordering.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from itertools import permutations

from .routing import (
    PlanningError,
    ReservationTable,
    TripPlan,
    plan_path,
    plan_trip,
)
from .warehouse import EnergyModel, GridMap

PERMUTATION_CAP = 4

ENERGY = "energy"
EARLIEST_ARRIVAL = "earliest-arrival"
PRIORITY_MODES = (ENERGY, EARLIEST_ARRIVAL)


class TooManyAgvs(ValueError):
    pass


class NoFeasibleOrdering(PlanningError):
    pass


@dataclass(frozen=True)
class PriorityDecision:
    ordering: tuple[int, ...]
    wasted_joules_total: float
    wasted_ticks_total: int
    per_agv: dict[int, tuple[int, float]]
    plans: dict[int, TripPlan] = field(default_factory=dict, compare=False, repr=False)
    tick: int = 0
    mode: str = ENERGY

    @property
    def key(self) -> tuple:
        return (self.wasted_joules_total, self.wasted_ticks_total, self.ordering)


def wasted_cost(
    grid: GridMap,
    agv: int,
    start,
    goal,
    loaded: bool,
    higher: set[int],
    table: ReservationTable,
    energy: EnergyModel | None = None,
    hold: int = 0,
) -> tuple[int, float]:
    """Delay and its energy price when ``agv`` yields to the AGVs in ``higher``.

    Plans once on ``table`` with ``higher`` removed and once on ``table`` as
    is; the difference in arrival tick is the wasted time.
    """
    energy = energy or EnergyModel()
    free = plan_path(grid, table.without(higher), agv, start, goal, loaded, energy, hold)
    bound = plan_path(grid, table, agv, start, goal, loaded, energy, hold)
    ticks = max(0, bound.end.tick - free.end.tick)
    return ticks, ticks * energy.rate(loaded)


def collision_status(grid: GridMap, table: ReservationTable, base: dict[int, TripPlan]) -> dict[int, bool]:
    """Load status of each AGV at the first tick its free plan meets another's."""
    out = {}
    for a, plan in base.items():
        occupied: ReservationTable = ReservationTable(table.horizon)
        for b, other in base.items():
            if b == a:
                continue
            for cell, tick in other.occupancy():
                occupied.vertex[(cell, tick)] = b
        first = None
        for cell, tick in plan.occupancy():
            if occupied.blockers(a, cell, tick):
                first = tick
                break
        out[a] = plan.status_at(first if first is not None else plan.legs[0].path.start.tick)
    return out


def _evaluate(grid, table, requests, ordering, base, status, energy):
    scratch = table.copy()
    plans = {}
    for a in ordering:
        try:
            plan = plan_trip(grid, scratch, requests[a], energy)
        except PlanningError:
            return None
        plan.claim(scratch)
        plans[a] = plan
    per_agv = {}
    for a in sorted(requests):
        ticks = max(0, plans[a].done - base[a].done)
        per_agv[a] = (ticks, ticks * energy.rate(status[a]))
    return plans, per_agv, scratch


def choose_priority(
    grid: GridMap,
    table: ReservationTable,
    requests,
    energy: EnergyModel | None = None,
    mode: str = ENERGY,
    cap: int = PERMUTATION_CAP,
    tick: int = 0,
) -> tuple[PriorityDecision, ReservationTable]:
    """Pick the planning order for a group of colliding trip requests.

    ``table`` must not hold any future claims of the group members. Returns
    the decision and a copy of ``table`` with the winning plans committed.
    Orderings under which some member cannot be routed at all are skipped.
    In earliest-arrival mode the AGV whose unobstructed trip finishes first
    goes first (ties to the lower id).
    """
    energy = energy or EnergyModel()
    if mode not in PRIORITY_MODES:
        raise ValueError(f"unknown priority mode {mode!r}")
    requests = {r.agv: r for r in requests}
    if mode == ENERGY and len(requests) > cap:
        raise TooManyAgvs(f"{len(requests)} colliding AGVs exceed the cap of {cap}")
    base = {a: plan_trip(grid, table, r, energy) for a, r in requests.items()}
    status = collision_status(grid, table, base)

    if mode == EARLIEST_ARRIVAL:
        first = tuple(sorted(requests, key=lambda a: (base[a].done, a)))
        candidates = [first] + [p for p in permutations(sorted(requests)) if p != first]
    else:
        candidates = list(permutations(sorted(requests)))

    best = None
    for ordering in candidates:
        result = _evaluate(grid, table, requests, ordering, base, status, energy)
        if result is None:
            continue
        plans, per_agv, scratch = result
        decision = PriorityDecision(
            ordering,
            sum(j for _, j in per_agv.values()),
            sum(t for t, _ in per_agv.values()),
            per_agv,
            plans,
            tick,
            mode,
        )
        if mode == EARLIEST_ARRIVAL:
            return decision, scratch
        if best is None or decision.key < best[0].key:
            best = (decision, scratch)
    if best is None:
        raise NoFeasibleOrdering(f"no ordering of AGVs {sorted(requests)} can be routed")
    return best


def dump_decisions_csv(decisions) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["tick", "agvs", "chosen_order", "wasted_J", "wasted_s"])
    for d in decisions:
        w.writerow(
            [
                d.tick,
                " ".join(map(str, sorted(d.ordering))),
                " ".join(map(str, d.ordering)),
                f"{d.wasted_joules_total:g}",
                d.wasted_ticks_total,
            ]
        )
    return buf.getvalue()
