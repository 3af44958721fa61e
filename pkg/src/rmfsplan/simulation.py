"""Event-driven execution of a task assignment.

Each AGV works through its task list in order. For every task it drives to
the task's pod and lifts it (pick dwell), carries it to the nearest
workstation (service dwell), brings it back and sets it down (release dwell).
Trips are planned when the AGV becomes free: the drive to the first pod at
tick 0, workstation-and-back as a single trip once a pick ends, and the drive
to the next pod once a release ends. After its last task an AGV stays in its
last pod; an AGV without tasks stays at its start cell.

When a new trip collides with trips already committed by other AGVs, the
group is handed to :func:`choose_priority` and replanned together.
"""

from __future__ import annotations

import csv
import heapq
import io
import json
from dataclasses import dataclass, field

from .priority import (
    EARLIEST_ARRIVAL,
    ENERGY,
    PERMUTATION_CAP,
    PRIORITY_MODES,
    PriorityDecision,
    TooManyAgvs,
    choose_priority,
)
from .routing import (
    Leg,
    LegPlan,
    PlanningError,
    ReservationTable,
    SpaceTimeNode,
    TripPlan,
    TripRequest,
    plan_trip,
    trip_blockers,
)
from .warehouse import Cell, CellKind, Scenario, manhattan_distance, step_energy


class SimulationStuck(RuntimeError):
    def __init__(self, message: str, trace: list[str] | None = None):
        self.trace = trace or []
        super().__init__(message)


class InvalidAssignment(ValueError):
    pass


@dataclass(frozen=True)
class Assignment:
    """Ordered task list per AGV id."""

    per_agv_tasks: dict[int, tuple[int, ...]]

    @classmethod
    def from_sections(cls, agv_ids, section1, section2) -> Assignment:
        out, i = {}, 0
        for a, n in zip(agv_ids, section2):
            out[a] = tuple(int(k) for k in section1[i : i + n])
            i += n
        return cls(out)

    def check(self, scenario: Scenario) -> None:
        seen = [k for ks in self.per_agv_tasks.values() for k in ks]
        if sorted(seen) != sorted(t.id for t in scenario.tasks):
            raise InvalidAssignment("every task must be assigned to exactly one AGV")
        unknown = set(self.per_agv_tasks) - set(scenario.agv_by_id)
        if unknown:
            raise InvalidAssignment(f"unknown AGV ids {sorted(unknown)}")

    def key(self) -> tuple:
        return tuple(sorted(self.per_agv_tasks.items()))

    def to_json(self) -> str:
        return json.dumps({str(a): list(ks) for a, ks in sorted(self.per_agv_tasks.items())}, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> Assignment:
        data = json.loads(text)
        return cls({int(a): tuple(int(k) for k in ks) for a, ks in data.items()})


@dataclass(frozen=True)
class ObjectiveVector:
    G1: float
    G2: float
    G3: float
    G4: float

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.G1, self.G2, self.G3, self.G4)

    def to_json(self) -> str:
        return json.dumps({"G1": self.G1, "G2": self.G2, "G3": self.G3, "G4": self.G4})


@dataclass(frozen=True)
class Row:
    agv: int
    tick: int
    cell: Cell
    loaded: bool
    activity: str  # start, move, wait, pick, service, release, idle
    task: int  # -1 when no task is in progress


@dataclass
class Schedule:
    rows: dict[int, list[Row]]
    completion: dict[int, int]
    joules: dict[int, float]
    decisions: list[PriorityDecision] = field(default_factory=list)

    def objectives(self) -> ObjectiveVector:
        ticks = list(self.completion.values()) or [0]
        joules = list(self.joules.values()) or [0.0]
        return ObjectiveVector(float(sum(ticks)), float(max(ticks)), float(sum(joules)), float(max(joules)))

    def events(self):
        """Rows collapsed into ``(agv, activity, first_tick, last_tick, cell, task)`` runs."""
        for a in sorted(self.rows):
            run = None
            for r in self.rows[a]:
                same = run and run[1] == r.activity and run[4] == r.cell and run[5] == r.task
                if same and r.activity in ("pick", "service", "release", "wait"):
                    run[3] = r.tick
                    continue
                if run:
                    yield tuple(run)
                run = [a, r.activity, r.tick, r.tick, r.cell, r.task]
            if run:
                yield tuple(run)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["agv", "tick", "x", "y", "status", "activity", "task"])
        for a in sorted(self.rows):
            for r in self.rows[a]:
                w.writerow([r.agv, r.tick, r.cell[0], r.cell[1], int(r.loaded), r.activity, r.task])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, scenario: Scenario) -> Schedule:
        rows: dict[int, list[Row]] = {a.id: [] for a in scenario.agvs}
        for rec in csv.DictReader(io.StringIO(text)):
            a = int(rec["agv"])
            rows.setdefault(a, []).append(
                Row(a, int(rec["tick"]), (int(rec["x"]), int(rec["y"])), rec["status"] == "1", rec["activity"], int(rec["task"]))
            )
        for rs in rows.values():
            rs.sort(key=lambda r: r.tick)
        return schedule_from_rows(rows, scenario)


def schedule_from_rows(rows: dict[int, list[Row]], scenario: Scenario) -> Schedule:
    completion, joules = {}, {}
    for a, rs in rows.items():
        completion[a] = rs[-1].tick if rs and rs[-1].activity != "idle" else 0
        joules[a] = _row_joules(rs, scenario)
    return Schedule(rows, completion, joules)


def _row_joules(rs: list[Row], scenario: Scenario) -> float:
    return float(sum(step_energy(r.loaded, r.cell != p.cell, scenario.energy) for p, r in zip(rs, rs[1:])))


def _task_legs(scenario: Scenario, tasks) -> list[Leg]:
    timing, grid = scenario.timing, scenario.grid
    legs = []
    for k in tasks:
        pod = scenario.task_by_id[k].pod_cell
        ws = grid.nearest_workstation(pod)
        legs.append(Leg(pod, False, timing.pick_dwell, "pick", k))
        legs.append(Leg(ws, True, timing.workstation_dwell, "service", k))
        legs.append(Leg(pod, False, timing.release_dwell, "release", k))
    return legs


def _leg_rows(agv: int, lp: LegPlan) -> list[Row]:
    leg = lp.leg
    out = []
    nodes = lp.path.nodes
    for prev, n in zip(nodes, nodes[1:]):
        out.append(Row(agv, n.tick, n.cell, leg.loaded, "move" if n.cell != prev.cell else "wait", leg.task))
    dwell_loaded = leg.activity == "service"
    for t in range(lp.arrival + 1, lp.done + 1):
        out.append(Row(agv, t, leg.goal, dwell_loaded, leg.activity, leg.task))
    return out


@dataclass
class _AgvState:
    legs: list[Leg]
    next_leg: int = 0
    trip: TripPlan | None = None
    rows: list[Row] = field(default_factory=list)
    event_tick: int = 0

    def pending_request(self, agv: int, start: SpaceTimeNode) -> TripRequest | None:
        if self.next_leg >= len(self.legs):
            return None
        n = 2 if self.legs[self.next_leg].activity == "service" else 1
        return TripRequest(agv, start, tuple(self.legs[self.next_leg : self.next_leg + n]))

    def replan_point(self, t: int):
        """Where the current trip can be rerouted from, as ``(leg index, node)``."""
        if self.trip is None:
            return None
        for i, lp in enumerate(self.trip.legs):
            if t < lp.arrival:
                return i, SpaceTimeNode(lp.path.cell_at(t), t)
            if t < lp.done:
                if i + 1 < len(self.trip.legs):
                    return i + 1, SpaceTimeNode(lp.leg.goal, lp.done)
                return None
        return None


class _Simulator:
    def __init__(self, assignment: Assignment, scenario: Scenario, mode: str, cap: int):
        if mode not in PRIORITY_MODES:
            raise ValueError(f"unknown priority mode {mode!r}")
        assignment.check(scenario)
        self.s = scenario
        self.mode = mode
        self.cap = cap
        self.grid = scenario.grid
        self.table = ReservationTable(self.grid.default_horizon())
        self.decisions: list[PriorityDecision] = []
        self.trace: list[str] = []
        self.state: dict[int, _AgvState] = {}
        self.events: list[tuple[int, int]] = []
        for a in scenario.agvs:
            tasks = assignment.per_agv_tasks.get(a.id, ())
            st = _AgvState(_task_legs(scenario, tasks))
            st.rows.append(Row(a.id, 0, a.start_cell, False, "start" if tasks else "idle", tasks[0] if tasks else -1))
            self.state[a.id] = st
            self.table.park(a.id, a.start_cell, 0)
            if tasks:
                heapq.heappush(self.events, (0, a.id))

    def run(self) -> Schedule:
        while self.events:
            t, a = heapq.heappop(self.events)
            st = self.state[a]
            if st.event_tick != t:
                continue
            self._handle(a, t)
        rows = {a: st.rows for a, st in self.state.items()}
        sched = schedule_from_rows(rows, self.s)
        sched.decisions = self.decisions
        return sched

    def _handle(self, a: int, t: int) -> None:
        st = self.state[a]
        here = st.rows[-1].cell
        request = st.pending_request(a, SpaceTimeNode(here, t))
        self.table.unpark(a)
        if request is None:
            self.table.park(a, here, t)
            return

        cutoffs = {}
        remaining = {}
        for b, other in self.state.items():
            if b == a:
                continue
            point = other.replan_point(t)
            if point is not None:
                cutoffs[b] = point[1].tick
                remaining[b] = point
        free_table = self.table.released(cutoffs)
        try:
            free = plan_trip(self.grid, free_table, request, self.s.energy)
        except PlanningError as exc:
            self.trace.append(f"t={t} AGV {a}: unobstructed plan failed: {exc}")
            self._commit_or_stuck(a, request, t)
            return
        colliders = trip_blockers(self.table, free) - {a}
        if not colliders:
            self._commit(a, free, t)
            return

        group = sorted(colliders | {a})
        mode = self.mode
        if len(group) > self.cap:
            mode = EARLIEST_ARRIVAL
        requests = [request]
        for b in group:
            if b == a:
                continue
            i, node = remaining[b]
            requests.append(TripRequest(b, node, tuple(lp.leg for lp in self.state[b].trip.legs[i:])))
        base_table = self.table.released({b: remaining[b][1].tick for b in group if b != a})
        try:
            decision, table = choose_priority(self.grid, base_table, requests, self.s.energy, mode, self.cap, t)
        except (PlanningError, TooManyAgvs) as exc:
            self.trace.append(f"t={t} AGV {a}: arbitration among {group} failed: {exc}")
            self._commit_or_stuck(a, request, t)
            return
        self.decisions.append(decision)
        self.table = table
        for b in group:
            plan = decision.plans[b]
            if b == a:
                self._record(a, plan, t, new_trip=True)
            else:
                i, node = remaining[b]
                old = self.state[b].trip
                merged = TripPlan(b, old.legs[:i] + plan.legs)
                self._record(b, merged, node.tick, new_trip=False, fresh=plan)

    def _commit_or_stuck(self, a, request, t):
        try:
            plan = plan_trip(self.grid, self.table, request, self.s.energy)
        except PlanningError as exc:
            self.trace.append(f"t={t} AGV {a}: plan against committed trips failed: {exc}")
            raise SimulationStuck(f"AGV {a} cannot continue at tick {t}", self.trace) from exc
        self._commit(a, plan, t)

    def _commit(self, a: int, plan: TripPlan, t: int) -> None:
        plan.claim(self.table)
        self._record(a, plan, t, new_trip=True)

    def _record(self, a, plan: TripPlan, from_tick: int, new_trip: bool, fresh: TripPlan | None = None):
        st = self.state[a]
        if new_trip:
            st.next_leg += len(plan.legs)
        st.trip = plan
        st.rows = [r for r in st.rows if r.tick <= from_tick]
        for lp in (fresh or plan).legs:
            st.rows.extend(_leg_rows(a, lp))
        st.event_tick = plan.done
        heapq.heappush(self.events, (plan.done, a))


def simulate(
    assignment: Assignment,
    scenario: Scenario,
    priority_mode: str = ENERGY,
    cap: int = PERMUTATION_CAP,
) -> tuple[Schedule, ObjectiveVector]:
    """Run an assignment to completion and score it.

    Running time of an AGV is the tick its last release dwell ends (0 without
    tasks); G1/G2 are the sum/max of running times and G3/G4 the sum/max of
    energy.
    """
    sched = _Simulator(assignment, scenario, priority_mode, cap).run()
    return sched, sched.objectives()


# ---------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Violation:
    family: str  # assignment, flow, dwell, exclusivity, collision, ordering
    agv: int
    tick: int
    message: str


def validate_schedule(schedule: Schedule, scenario: Scenario) -> list[Violation]:
    """Check a schedule against the operating rules; empty means valid.

    Rows after an AGV's last tick are taken to continue in its last cell.
    """
    out: list[Violation] = []
    grid, timing = scenario.grid, scenario.timing
    pods = {t.pod_cell: t.id for t in scenario.tasks}
    picks: dict[int, list[tuple[int, int]]] = {}
    services: dict[int, list[tuple[int, int]]] = {}
    releases: dict[int, list[tuple[int, int]]] = {}
    runs = {"pick": picks, "service": services, "release": releases}
    owner: dict[int, set[int]] = {}
    last_tick = 0

    for a, rs in schedule.rows.items():
        spec = scenario.agv_by_id.get(a)
        if spec is None:
            out.append(Violation("assignment", a, 0, "unknown AGV"))
            continue
        if not rs or rs[0].tick != 0 or rs[0].cell != spec.start_cell:
            out.append(Violation("flow", a, 0, "AGV does not begin at its start cell at tick 0"))
            continue
        last_tick = max(last_tick, rs[-1].tick)
        for p, r in zip(rs, rs[1:]):
            if r.tick != p.tick + 1:
                out.append(Violation("flow", a, r.tick, "ticks are not consecutive"))
            if manhattan_distance(p.cell, r.cell) > 1:
                out.append(Violation("flow", a, r.tick, f"jump from {p.cell} to {r.cell}"))
        prev = None
        for r in rs:
            if r.task >= 0:
                owner.setdefault(r.task, set()).add(a)
            stayed = prev is not None and prev.cell == r.cell
            prev = r
            if not grid.in_bounds(r.cell):
                out.append(Violation("flow", a, r.tick, f"cell {r.cell} outside the grid"))
                continue
            kind = grid.kind(r.cell)
            if kind == CellKind.STORAGE_POD and pods.get(r.cell) != r.task and not stayed:
                out.append(Violation("flow", a, r.tick, f"entered pod {r.cell} of another task"))
            if kind == CellKind.WORKSTATION and r.task < 0:
                out.append(Violation("flow", a, r.tick, "inside a workstation without a task"))
        for name, store in runs.items():
            for task, first, last, cell in _runs(rs, name):
                store.setdefault(task, []).append((first, last))
                need = {"pick": timing.pick_dwell, "service": timing.workstation_dwell, "release": timing.release_dwell}[name]
                if last - first + 1 < need:
                    out.append(Violation("dwell", a, first, f"{name} dwell {last - first + 1} < {need} for task {task}"))
                want_kind = CellKind.WORKSTATION if name == "service" else CellKind.STORAGE_POD
                if grid.kind(cell) != want_kind or (name != "service" and pods.get(cell) != task):
                    out.append(Violation("dwell", a, first, f"{name} for task {task} at wrong cell {cell}"))
        carrying = False
        for r in rs:
            expected = r.activity == "service" or (r.activity in ("move", "wait") and carrying)
            if r.loaded != expected:
                out.append(Violation("ordering", a, r.tick, f"load status {int(r.loaded)} inconsistent with task progress"))
                break
            if r.activity == "pick":
                carrying = True
            elif r.activity in ("service", "release"):
                carrying = False
        if rs[-1].activity not in ("release", "idle"):
            out.append(Violation("ordering", a, rs[-1].tick, "AGV ends before returning its last pod"))

    for t in scenario.tasks:
        who = owner.get(t.id, set())
        if len(who) != 1:
            out.append(Violation("assignment", -1, 0, f"task {t.id} handled by {len(who)} AGVs"))
        p, s, r = picks.get(t.id, []), services.get(t.id, []), releases.get(t.id, [])
        if (len(p), len(s), len(r)) != (1, 1, 1):
            out.append(Violation("assignment", -1, 0, f"task {t.id} has {len(p)} picks, {len(s)} services, {len(r)} releases"))
            continue
        if not p[0][1] < s[0][0] <= s[0][1] < r[0][0]:
            out.append(Violation("ordering", -1, p[0][0], f"task {t.id} not picked, served and released in order"))

    for a, rs in schedule.rows.items():
        tasks_in_order = []
        for r in rs:
            if r.task >= 0 and (not tasks_in_order or tasks_in_order[-1] != r.task):
                tasks_in_order.append(r.task)
        if len(tasks_in_order) != len(set(tasks_in_order)):
            out.append(Violation("ordering", a, 0, "task started before the previous pod was returned"))

    positions = {a: {r.tick: r.cell for r in rs} for a, rs in schedule.rows.items() if rs}
    ends = {a: (rs[-1].tick, rs[-1].cell) for a, rs in schedule.rows.items() if rs}

    def where(a, tick):
        end, cell = ends[a]
        return cell if tick >= end else positions[a].get(tick)

    agvs = sorted(positions)
    for tick in range(last_tick + 1):
        seen: dict[Cell, int] = {}
        for a in agvs:
            c = where(a, tick)
            if c is None:
                continue
            if c in seen:
                fam = "exclusivity" if grid.in_bounds(c) and grid.kind(c) == CellKind.WORKSTATION else "collision"
                out.append(Violation(fam, a, tick, f"AGVs {seen[c]} and {a} both at {c}"))
            else:
                seen[c] = a
        if tick == 0:
            continue
        for i, a in enumerate(agvs):
            for b in agvs[i + 1 :]:
                pa, pb = where(a, tick - 1), where(b, tick - 1)
                ca, cb = where(a, tick), where(b, tick)
                if None in (pa, pb, ca, cb):
                    continue
                if pa == cb and pb == ca and pa != ca:
                    out.append(Violation("collision", a, tick, f"AGVs {a} and {b} swap {pa} and {ca}"))
    return out


def _runs(rs: list[Row], activity: str):
    run = None
    for r in rs:
        if r.activity == activity and run and run[0] == r.task and run[2] == r.tick - 1 and run[3] == r.cell:
            run[2] = r.tick
            continue
        if run:
            yield tuple(run)
            run = None
        if r.activity == activity:
            run = [r.task, r.tick, r.tick, r.cell]
    if run:
        yield tuple(run)


def dump_objectives_json(obj: ObjectiveVector) -> str:
    return obj.to_json()
