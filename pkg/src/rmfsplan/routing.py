"""Space-time routing over a reservation table.

Paths live on the time-expanded grid: a node is ``(cell, tick)`` and each
step either moves to a 4-neighbour or waits in place. Committed paths are
stored in a :class:`ReservationTable`; the planner keeps a one-tick
clearance around every claim, i.e. an AGV may not occupy a cell in a tick
adjacent to another AGV's occupation of that cell. The clearance rules out
vertex conflicts, head-on swaps and nose-to-tail following in one check.
"""

from __future__ import annotations

import csv
import heapq
import io
from dataclasses import dataclass, field

from .warehouse import Cell, EnergyModel, GridMap, manhattan_distance, step_energy


class PlanningError(RuntimeError):
    pass


class NoPath(PlanningError):
    pass


class HorizonExceeded(PlanningError):
    pass


class DeadlockUnresolvable(PlanningError):
    pass


class ReservationConflict(PlanningError):
    pass


@dataclass(frozen=True, order=True)
class SpaceTimeNode:
    cell: Cell
    tick: int

    def __post_init__(self):
        if self.tick < 0:
            raise ValueError("tick must be non-negative")


@dataclass(frozen=True)
class ResolveRecord:
    """One invocation of the in-aisle retreat rule during a search."""

    colliding: SpaceTimeNode
    blocker: int
    added_time: int
    pivot: SpaceTimeNode
    emitted: SpaceTimeNode | None
    deadlock: bool = False
    third_party: tuple[int, ...] = ()


@dataclass(frozen=True)
class PlannedPath:
    agv: int
    nodes: tuple[SpaceTimeNode, ...]
    loaded: bool
    total_joules: float
    resolutions: tuple[ResolveRecord, ...] = field(default=(), compare=False)
    fallback_used: bool = field(default=False, compare=False)

    @property
    def load_status(self) -> tuple[bool, ...]:
        return (self.loaded,) * len(self.nodes)

    @property
    def start(self) -> SpaceTimeNode:
        return self.nodes[0]

    @property
    def end(self) -> SpaceTimeNode:
        return self.nodes[-1]

    @property
    def total_ticks(self) -> int:
        return self.nodes[-1].tick - self.nodes[0].tick

    def steps(self):
        for a, b in zip(self.nodes, self.nodes[1:]):
            yield a, b, a.cell != b.cell

    def recompute_joules(self, energy: EnergyModel) -> float:
        return sum(step_energy(self.loaded, moved, energy) for _, _, moved in self.steps())

    def cell_at(self, tick: int) -> Cell:
        return self.nodes[tick - self.nodes[0].tick].cell


def path_from_cells(agv: int, cells, start_tick: int, loaded: bool = False, energy: EnergyModel | None = None) -> PlannedPath:
    energy = energy or EnergyModel()
    nodes = tuple(SpaceTimeNode(tuple(c), start_tick + i) for i, c in enumerate(cells))
    joules = sum(step_energy(loaded, a.cell != b.cell, energy) for a, b in zip(nodes, nodes[1:]))
    return PlannedPath(agv, nodes, loaded, joules)


class ReservationTable:
    """Committed space-time claims.

    ``vertex`` maps ``(cell, tick)`` to the owning AGV, ``edge`` maps
    ``(from_cell, to_cell, departure_tick)`` to the moving AGV and ``parked``
    maps a cell to ``(agv, from_tick)`` for an AGV that stays there for good.
    ``horizon`` bounds each search: a path may not run more than ``horizon``
    ticks past its start tick.
    """

    def __init__(self, horizon: int = 1000):
        self.horizon = horizon
        self.vertex: dict[tuple[Cell, int], int] = {}
        self.edge: dict[tuple[Cell, Cell, int], int] = {}
        self.parked: dict[Cell, tuple[int, int]] = {}
        self._last_tick = -1

    def copy(self) -> ReservationTable:
        t = ReservationTable(self.horizon)
        t.vertex = dict(self.vertex)
        t.edge = dict(self.edge)
        t.parked = dict(self.parked)
        t._last_tick = self._last_tick
        return t

    def __len__(self):
        return len(self.vertex)

    @property
    def static_after(self) -> int:
        """Tick after which no claim changes any more."""
        parks = max((f for _, f in self.parked.values()), default=-1)
        return max(self._last_tick, parks)

    def occupant(self, cell: Cell, tick: int) -> int | None:
        a = self.vertex.get((cell, tick))
        if a is not None:
            return a
        p = self.parked.get(cell)
        if p is not None and tick >= p[1]:
            return p[0]
        return None

    def blockers(self, agv: int, cell: Cell, tick: int) -> set[int]:
        """Other AGVs that rule out ``agv`` occupying ``cell`` at ``tick``."""
        out = set()
        for t in (tick - 1, tick, tick + 1):
            a = self.occupant(cell, t)
            if a is not None and a != agv:
                out.add(a)
        return out

    def hold_blockers(self, agv: int, cell: Cell, t0: int, t1: int) -> set[int]:
        out = set()
        for t in range(t0 - 1, t1 + 2):
            a = self.occupant(cell, t)
            if a is not None and a != agv:
                out.add(a)
        return out

    def claim(self, agv: int, cell: Cell, tick: int) -> None:
        owner = self.occupant(cell, tick)
        if owner is not None and owner != agv:
            raise ReservationConflict(f"{cell}@{tick} already held by AGV {owner}")
        self.vertex[(cell, tick)] = agv
        if tick > self._last_tick:
            self._last_tick = tick

    def claim_stay(self, agv: int, cell: Cell, t0: int, t1: int) -> None:
        for t in range(t0, t1 + 1):
            self.claim(agv, cell, t)

    def claim_path(self, path: PlannedPath) -> None:
        for a, b in zip(path.nodes, path.nodes[1:]):
            rev = self.edge.get((b.cell, a.cell, a.tick))
            if a.cell != b.cell and rev is not None and rev != path.agv:
                raise ReservationConflict(f"head-on swap with AGV {rev} at tick {a.tick}")
        for n in path.nodes:
            self.claim(path.agv, n.cell, n.tick)
        for a, b in zip(path.nodes, path.nodes[1:]):
            if a.cell != b.cell:
                self.edge[(a.cell, b.cell, a.tick)] = path.agv

    def park(self, agv: int, cell: Cell, from_tick: int) -> None:
        p = self.parked.get(cell)
        if p is not None and p[0] != agv:
            raise ReservationConflict(f"{cell} already parked by AGV {p[0]}")
        self.parked[cell] = (agv, from_tick)

    def unpark(self, agv: int) -> None:
        self.parked = {c: p for c, p in self.parked.items() if p[0] != agv}

    def parked_cell(self, agv: int) -> tuple[Cell, int] | None:
        for c, (a, f) in self.parked.items():
            if a == agv:
                return c, f
        return None

    def released(self, cutoffs: dict[int, int]) -> ReservationTable:
        """Copy without each listed AGV's claims later than its cutoff tick.

        A parked AGV in ``cutoffs`` keeps occupying its cell up to the cutoff.
        """
        t = ReservationTable(self.horizon)
        t.vertex = {k: a for k, a in self.vertex.items() if a not in cutoffs or k[1] <= cutoffs[a]}
        t.edge = {k: a for k, a in self.edge.items() if a not in cutoffs or k[2] < cutoffs[a]}
        t.parked = {c: p for c, p in self.parked.items() if p[0] not in cutoffs}
        for c, (a, f) in self.parked.items():
            if a in cutoffs:
                for tick in range(f, cutoffs[a] + 1):
                    t.vertex[(c, tick)] = a
        t._last_tick = max((k[1] for k in t.vertex), default=-1)
        return t

    def without(self, agvs) -> ReservationTable:
        agvs = set(agvs)
        t = ReservationTable(self.horizon)
        t.vertex = {k: a for k, a in self.vertex.items() if a not in agvs}
        t.edge = {k: a for k, a in self.edge.items() if a not in agvs}
        t.parked = {c: p for c, p in self.parked.items() if p[0] not in agvs}
        t._last_tick = max((k[1] for k in t.vertex), default=-1)
        return t

    def claims_of(self, agv: int) -> list[tuple[Cell, int]]:
        return sorted((k for k, a in self.vertex.items() if a == agv), key=lambda k: k[1])


@dataclass(frozen=True)
class Resolution:
    added_time: int
    pivot: SpaceTimeNode
    node: SpaceTimeNode | None
    deadlock: bool = False
    third_party: tuple[int, ...] = ()


def resolve_aisle_collision(
    grid: GridMap,
    table: ReservationTable,
    agv: int,
    current: SpaceTimeNode,
    camefrom: dict[SpaceTimeNode, SpaceTimeNode | None],
    blocker: int,
) -> Resolution:
    """Retreat along ``camefrom`` until the AGV can stand clear of ``blocker``.

    Each step back adds one tick of lost time. A retreat pivot is usable when
    it is outside the aisle or the AGV can hold it, free of collisions, for
    the time spent walking into the aisle and back (``2 * added_time``
    ticks); the pivot is then re-emitted at ``tick + 2 * added_time``. A
    pivot outside the aisle that is occupied yields no node, mirroring the
    rule that colliding nodes outside aisles are not expanded. Meeting a
    third AGV while retreating, or running out of path to retreat along, is
    a deadlock: the caller should wait ``2 * added_time`` and replan.
    """
    added = 0
    node = current
    while True:
        added += 1
        prev = camefrom.get(node)
        if prev is None:
            return Resolution(added, node, None, deadlock=True)
        node = prev
        target_tick = node.tick + 2 * added
        others = table.hold_blockers(agv, node.cell, node.tick + 1, target_tick)
        if not others:
            return Resolution(added, node, SpaceTimeNode(node.cell, target_tick))
        if not grid.in_aisle(node.cell):
            return Resolution(added, node, None)
        third = tuple(sorted(others - {blocker}))
        if third:
            return Resolution(added, node, None, deadlock=True, third_party=third)


def plan_path(
    grid: GridMap,
    table: ReservationTable,
    agv: int,
    start: SpaceTimeNode,
    goal: Cell,
    loaded: bool = False,
    energy: EnergyModel | None = None,
    hold: int = 0,
    resolve: bool = True,
    horizon: int | None = None,
    earliest: int = 0,
) -> PlannedPath:
    """Earliest-arrival conflict-free path from ``start`` to ``goal``.

    A* over ``(cell, tick)`` with ``g = tick - start.tick`` and ``h`` the
    Manhattan distance to the goal. Open-list ties go to lower ``h``, then to
    lower ``(tick, y, x)``. The goal only counts as reached when the AGV can
    stay there for ``hold`` further ticks, and not before tick ``earliest``.
    Blocked moves into an aisle cell
    hand over to :func:`resolve_aisle_collision`; other blocked moves are
    dropped.
    """
    energy = energy or EnergyModel()
    st = start.tick
    limit = st + (horizon if horizon is not None else table.horizon)
    static = table.static_after + 2
    gx, gy = goal

    parent: dict[SpaceTimeNode, SpaceTimeNode | None] = {start: None}
    closed: set[SpaceTimeNode] = set()
    static_seen: set[Cell] = set()
    records: list[ResolveRecord] = []
    deadlock_waits: list[int] = []
    heap = [(abs(start.cell[0] - gx) + abs(start.cell[1] - gy), 0, st, start.cell[1], start.cell[0])]
    hit_limit = False
    found: SpaceTimeNode | None = None

    def push(node: SpaceTimeNode):
        h = abs(node.cell[0] - gx) + abs(node.cell[1] - gy)
        heapq.heappush(heap, (node.tick - st + h, h, node.tick, node.cell[1], node.cell[0]))

    while heap:
        _, _, t, y, x = heapq.heappop(heap)
        c = (x, y)
        cur = SpaceTimeNode(c, t)
        if cur in closed:
            continue
        closed.add(cur)
        if t > static and t >= earliest:
            if c in static_seen:
                continue
            static_seen.add(c)
        if c == goal and t >= earliest and not table.hold_blockers(agv, goal, t, t + hold):
            found = cur
            break
        if t >= limit:
            hit_limit = True
            continue
        nt = t + 1
        for n in grid.neighbors(c, goal):
            nxt = SpaceTimeNode(n, nt)
            if nxt in closed or nxt in parent:
                continue
            blocking = table.blockers(agv, n, nt)
            if not blocking:
                parent[nxt] = cur
                push(nxt)
            elif resolve and len(blocking) == 1 and grid.in_aisle(n):
                (vj,) = blocking
                parent_view = _ChainView(parent, nxt, cur)
                res = resolve_aisle_collision(grid, table, agv, nxt, parent_view, vj)
                records.append(ResolveRecord(nxt, vj, res.added_time, res.pivot, res.node, res.deadlock, res.third_party))
                if res.deadlock:
                    deadlock_waits.append(2 * res.added_time)
                elif res.node is not None and res.node not in closed and res.node.tick <= limit:
                    _link_wait_chain(parent, res.pivot, res.node)
                    push(res.node)
        if t <= static or c == goal:
            wait = SpaceTimeNode(c, nt)
            if wait not in closed and wait not in parent and not table.blockers(agv, c, nt):
                parent[wait] = cur
                push(wait)

    best = None
    if found is not None:
        best = _build(agv, found, parent, loaded, energy, records)
    for w in sorted(set(deadlock_waits))[:1]:
        alt = _wait_then_replan(grid, table, agv, start, goal, loaded, energy, hold, w, limit, earliest)
        if alt is not None and (best is None or alt.end.tick < best.end.tick):
            best = PlannedPath(alt.agv, alt.nodes, alt.loaded, alt.total_joules, tuple(records), True)
    if best is not None:
        return best
    if deadlock_waits:
        raise DeadlockUnresolvable(f"AGV {agv}: retreat and wait-replan both failed")
    if hit_limit:
        raise HorizonExceeded(f"AGV {agv}: goal {goal} not reached before tick {limit}")
    raise NoPath(f"AGV {agv}: no path from {start.cell} to {goal}")


class _ChainView(dict):
    """``camefrom`` lookup that also knows the parent of the colliding node."""

    def __init__(self, parent, colliding, cur):
        super().__init__()
        self._parent = parent
        self._colliding = colliding
        self._cur = cur

    def get(self, key, default=None):
        if key == self._colliding:
            return self._cur
        return self._parent.get(key, default)


def _link_wait_chain(parent, pivot: SpaceTimeNode, node: SpaceTimeNode) -> None:
    prev = pivot
    for t in range(pivot.tick + 1, node.tick + 1):
        n = SpaceTimeNode(pivot.cell, t)
        parent.setdefault(n, prev)
        prev = n


def _build(agv, found, parent, loaded, energy, records) -> PlannedPath:
    nodes = []
    n = found
    while n is not None:
        nodes.append(n)
        n = parent[n]
    nodes.reverse()
    joules = sum(step_energy(loaded, a.cell != b.cell, energy) for a, b in zip(nodes, nodes[1:]))
    return PlannedPath(agv, tuple(nodes), loaded, joules, tuple(records))


def _wait_then_replan(grid, table, agv, start, goal, loaded, energy, hold, wait, limit, earliest=0):
    if table.hold_blockers(agv, start.cell, start.tick + 1, start.tick + wait):
        return None
    later = SpaceTimeNode(start.cell, start.tick + wait)
    try:
        tail = plan_path(grid, table, agv, later, goal, loaded, energy, hold, resolve=False, horizon=limit - later.tick, earliest=earliest)
    except PlanningError:
        return None
    waits = tuple(SpaceTimeNode(start.cell, start.tick + k) for k in range(wait))
    nodes = waits + tail.nodes
    return PlannedPath(agv, nodes, loaded, tail.total_joules + wait * step_energy(loaded, False, energy))


@dataclass(frozen=True)
class Leg:
    """One routed segment of a trip followed by a dwell at its goal."""

    goal: Cell
    loaded: bool
    hold: int
    activity: str  # dwell label: "pick", "service" or "release"
    task: int


@dataclass(frozen=True)
class LegPlan:
    leg: Leg
    path: PlannedPath

    @property
    def arrival(self) -> int:
        return self.path.end.tick

    @property
    def done(self) -> int:
        return self.path.end.tick + self.leg.hold


@dataclass(frozen=True)
class TripRequest:
    agv: int
    start: SpaceTimeNode
    legs: tuple[Leg, ...]


@dataclass(frozen=True)
class TripPlan:
    agv: int
    legs: tuple[LegPlan, ...]

    @property
    def arrival(self) -> int:
        return self.legs[-1].arrival

    @property
    def done(self) -> int:
        return self.legs[-1].done

    @property
    def total_joules(self) -> float:
        return sum(lp.path.total_joules for lp in self.legs)

    def occupancy(self):
        """Every ``(cell, tick)`` the trip occupies, dwells included."""
        for lp in self.legs:
            for n in lp.path.nodes:
                yield n.cell, n.tick
            for t in range(lp.arrival + 1, lp.done + 1):
                yield lp.leg.goal, t

    def status_at(self, tick: int) -> bool:
        for lp in self.legs:
            if tick <= lp.done:
                return lp.leg.loaded
        return self.legs[-1].leg.loaded

    def claim(self, table: ReservationTable) -> None:
        for lp in self.legs:
            table.claim_path(lp.path)
            table.claim_stay(self.agv, lp.leg.goal, lp.arrival, lp.done)


def plan_trip(
    grid: GridMap,
    table: ReservationTable,
    request: TripRequest,
    energy: EnergyModel | None = None,
    retries: int = 16,
) -> TripPlan:
    """Plan consecutive legs; later legs that fail push earlier arrivals back.

    Leg ``i + 1`` starts where leg ``i``'s dwell ends. If a later leg cannot
    be routed, the previous leg is replanned to arrive at least one tick later
    than before, up to ``retries`` times per leg.
    """
    plans: list[LegPlan] = []
    earliest = [0] * len(request.legs)
    attempts = [0] * len(request.legs)
    i = 0
    start = request.start
    while i < len(request.legs):
        leg = request.legs[i]
        try:
            path = plan_path(grid, table, request.agv, start, leg.goal, leg.loaded, energy, leg.hold, earliest=earliest[i])
        except PlanningError:
            if i == 0 or attempts[i - 1] >= retries:
                raise
            prev = plans.pop()
            i -= 1
            attempts[i] += 1
            earliest[i] = prev.arrival + 1
            earliest[i + 1] = 0
            start = SpaceTimeNode(plans[-1].leg.goal, plans[-1].done) if plans else request.start
            continue
        lp = LegPlan(leg, path)
        plans.append(lp)
        start = SpaceTimeNode(leg.goal, lp.done)
        i += 1
    return TripPlan(request.agv, tuple(plans))


def trip_blockers(table: ReservationTable, plan: TripPlan) -> set[int]:
    """AGVs in ``table`` whose claims keep ``plan`` from being committed."""
    out: set[int] = set()
    for cell, tick in plan.occupancy():
        out |= table.blockers(plan.agv, cell, tick)
    return out


@dataclass(frozen=True)
class Conflict:
    kind: str  # "head-on", "cross" or "stay-on"
    agvs: tuple[int, int]
    cells: tuple[Cell, ...]
    tick: int


def detect_conflicts(paths) -> list[Conflict]:
    """Vertex and swap conflicts among paths.

    Two AGVs in one cell at one tick form a cross conflict if both just moved
    there and a stay-on conflict otherwise; two AGVs exchanging cells over the
    same tick form a head-on conflict.
    """
    occupancy: dict[tuple[Cell, int], list[tuple[int, bool]]] = {}
    moves: dict[tuple[Cell, Cell, int], int] = {}
    for p in paths:
        prev = None
        for n in p.nodes:
            moved = prev is not None and prev.cell != n.cell
            occupancy.setdefault((n.cell, n.tick), []).append((p.agv, moved))
            if moved:
                moves[(prev.cell, n.cell, prev.tick)] = p.agv
            prev = n
    out = []
    for (cell, tick), occ in sorted(occupancy.items(), key=lambda kv: (kv[0][1], kv[0][0])):
        for i in range(len(occ)):
            for j in range(i + 1, len(occ)):
                (a, ma), (b, mb) = occ[i], occ[j]
                if a == b:
                    continue
                kind = "cross" if ma and mb else "stay-on"
                out.append(Conflict(kind, tuple(sorted((a, b))), (cell,), tick))
    for (u, v, t), a in sorted(moves.items(), key=lambda kv: (kv[0][2], kv[0][0], kv[0][1])):
        b = moves.get((v, u, t))
        if b is not None and b != a and (u, v) < (v, u):
            out.append(Conflict("head-on", tuple(sorted((a, b))), (u, v), t))
    out.sort(key=lambda c: (c.tick, c.kind, c.agvs))
    return out


def dump_paths_csv(paths) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["agv_id", "tick", "x", "y", "status"])
    for p in paths:
        for n in p.nodes:
            w.writerow([p.agv, n.tick, n.cell[0], n.cell[1], int(p.loaded)])
    return buf.getvalue()


def manhattan_lower_bound(start: SpaceTimeNode, goal: Cell) -> int:
    return start.tick + manhattan_distance(start.cell, goal)
