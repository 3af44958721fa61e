"""Fixture maps and small builders shared by the test modules."""

from __future__ import annotations

from collections import deque
from itertools import combinations, permutations

import numpy as np

from rmfsplan.routing import PlanningError, ReservationTable, SpaceTimeNode, path_from_cells, plan_path
from rmfsplan.simulation import Assignment
from rmfsplan.warehouse import AgvSpec, CellKind, GridMap, Scenario, Task

P, A, C, W = CellKind.STORAGE_POD, CellKind.AISLE, CellKind.CROSS_AISLE, CellKind.WORKSTATION


def aisle_grid() -> GridMap:
    """One horizontal aisle (x = 1..8, y = 1) between two pod rows, cross-aisles at x = 0 and 9.

    ::

        + # # # # # # # # +
        + . . . . . . . . +
        + # # # # # # # # +
        + + + + W + + + + +
    """
    k = np.full((4, 10), C)
    k[0, 1:9] = P
    k[1, 1:9] = A
    k[2, 1:9] = P
    k[3, 4] = W
    return GridMap(k)


def retreat_fixture():
    """AGV B walks west down the aisle into pod (3, 2) while AGV A enters from the west.

    Returns the grid, a table holding B's claims, A's start node and A's goal.
    A alone would reach pod (8, 0) at tick 9.
    """
    grid = aisle_grid()
    table = ReservationTable(200)
    b = path_from_cells(1, [(8 - t, 1) for t in range(6)] + [(3, 2)], 0)
    table.claim_path(b)
    table.park(1, (3, 2), 6)
    return grid, table, SpaceTimeNode((0, 1), 0), (8, 0)


def open_grid(width: int = 7, height: int = 7) -> GridMap:
    k = np.full((height, width), C)
    k[height - 1, width // 2] = W
    return GridMap(k)


def brute_fronts(points) -> list[list[int]]:
    """Fronts by repeatedly peeling the points nobody dominates (quadratic per front)."""

    def dom(a, b):
        return all(x <= y for x, y in zip(a, b)) and a != b

    left = list(range(len(points)))
    fronts = []
    while left:
        front = [i for i in left if not any(dom(tuple(points[j]), tuple(points[i])) for j in left)]
        fronts.append(sorted(front))
        left = [i for i in left if i not in front]
    return fronts


def scenario_from(grid: GridMap, pods, starts, **kw) -> Scenario:
    tasks = tuple(Task(i, tuple(c)) for i, c in enumerate(pods))
    agvs = tuple(AgvSpec(i, tuple(c)) for i, c in enumerate(starts))
    return Scenario(grid, tasks, agvs, **kw)


def random_assignment(scenario: Scenario, rng: np.random.Generator) -> Assignment:
    ids = [t.id for t in scenario.tasks]
    perm = [int(v) for v in rng.permutation(ids)]
    cuts = np.sort(rng.integers(0, len(perm) + 1, size=len(scenario.agvs) - 1))
    counts = np.diff(np.concatenate([[0], cuts, [len(perm)]]))
    return Assignment.from_sections([a.id for a in scenario.agvs], perm, counts)


def collision_fixture(seed: int):
    """2-4 single-leg trips on an open 7 x 7 floor whose free plans collide.

    Returns ``(grid, table, requests)`` with an empty table.
    """
    from rmfsplan.routing import Leg, ReservationTable, SpaceTimeNode, TripRequest, plan_trip, trip_blockers

    rng = np.random.default_rng(seed)
    grid = open_grid()
    floor = [c for c in grid.cells_of(C)]
    while True:
        k = int(rng.integers(2, 5))
        picks = rng.choice(len(floor), size=2 * k, replace=False)
        starts, goals = picks[:k], picks[k:]
        requests = [
            TripRequest(a, SpaceTimeNode(floor[s], 0), (Leg(floor[g], bool(rng.integers(2)), 0, "move", -1),))
            for a, (s, g) in enumerate(zip(starts, goals))
        ]
        table = ReservationTable(200)
        # every AGV must collide with someone when all plan freely
        free = {r.agv: plan_trip(grid, table, r) for r in requests}
        hit = set()
        for a, plan in free.items():
            others = ReservationTable(200)
            for b, q in free.items():
                if b != a:
                    for cell, tick in q.occupancy():
                        others.vertex[(cell, tick)] = b
            if trip_blockers(others, plan):
                hit.add(a)
        if len(hit) == k:
            return grid, table, requests


def bfs_distance(grid, start, goal) -> int:
    """Shortest 4-connected walk over floor cells; the goal may be any cell kind."""
    floor = (CellKind.AISLE, CellKind.CROSS_AISLE)
    dist = {start: 0}
    queue = deque([start])
    while queue:
        c = queue.popleft()
        if c == goal:
            return dist[c]
        for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            n = (c[0] + dx, c[1] + dy)
            if not (0 <= n[0] < grid.width and 0 <= n[1] < grid.height) or n in dist:
                continue
            if n == goal or grid.kinds[n[1], n[0]] in floor:
                dist[n] = dist[c] + 1
                queue.append(n)
    return -1


def enumerate_orderings(grid, table, requests):
    """Plan every ordering from scratch and return the minimal ``(joules, ticks, ordering)``."""
    rate = {True: 500.0, False: 200.0}
    base = {r.agv: plan_path(grid, table, r.agv, r.start, r.legs[0].goal).end.tick for r in requests}
    by_id = {r.agv: r for r in requests}
    best = None
    for order in permutations(sorted(by_id)):
        scratch = table.copy()
        joules, ticks = 0.0, 0
        try:
            for a in order:
                r = by_id[a]
                p = plan_path(grid, scratch, a, r.start, r.legs[0].goal, r.legs[0].loaded)
                scratch.claim_path(p)
                delay = p.end.tick - base[a]
                joules += delay * rate[r.legs[0].loaded]
                ticks += delay
        except PlanningError:
            continue
        key = (joules, ticks, order)
        if best is None or key < best:
            best = key
    return best


def inclusion_exclusion(front, ref) -> float:
    """Union of boxes by inclusion-exclusion over every subset of points."""
    total = 0.0
    for k in range(1, len(front) + 1):
        for subset in combinations(front, k):
            corner = np.max(np.array(subset, dtype=float), axis=0)
            total += (-1) ** (k + 1) * float(np.prod(np.asarray(ref, float) - corner))
    return total
