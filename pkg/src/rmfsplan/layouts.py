"""Parallel-aisle warehouse layouts and seeded random scenarios."""

from __future__ import annotations

import numpy as np

from .warehouse import (
    AgvSpec,
    CellKind,
    EnergyModel,
    GridMap,
    Scenario,
    Task,
    TimingModel,
)

# Row pattern of the 21 m x 47 m floor: two bands of 2 x 7 pod blocks split by
# a 3 m cross-aisle, workstations on the bottom row two cells below the pods.
FULL_ROWS = "+" + "B" * 7 + "+++" + "B" * 7 + "++" + "W"
FULL_WIDTH = 47
FULL_WORKSTATIONS = (11, 23, 35)


def block_kinds(width: int, row_pattern: str, workstation_cols) -> np.ndarray:
    """Build a cell-kind array from a row pattern.

    ``row_pattern`` has one character per row: ``+`` cross-aisle row, ``B`` a
    row through the pod blocks, ``W`` the workstation row. Block rows read
    ``+ . # # . # # . ... +``: 2-wide pod blocks separated by 1-wide aisles,
    padded with cross-aisle on the right.
    """
    if width < 5:
        raise ValueError("width must be at least 5")
    interior = ["."]
    while len(interior) + 3 <= width - 2:
        interior += ["#", "#", "."]
    interior += ["+"] * (width - 2 - len(interior))
    block_row = ["+"] + interior + ["+"]
    token_kind = {".": CellKind.AISLE, "#": CellKind.STORAGE_POD, "+": CellKind.CROSS_AISLE}
    kinds = np.full((len(row_pattern), width), CellKind.CROSS_AISLE, dtype=np.int8)
    for y, r in enumerate(row_pattern):
        if r == "B":
            kinds[y] = [token_kind[t] for t in block_row]
        elif r == "W":
            for x in workstation_cols:
                kinds[y, x] = CellKind.WORKSTATION
        elif r != "+":
            raise ValueError(f"unknown row code {r!r}")
    return kinds


def full_grid() -> GridMap:
    return GridMap(block_kinds(FULL_WIDTH, FULL_ROWS, FULL_WORKSTATIONS))


def desk_row_pattern(height: int, block_height: int) -> str:
    pattern = "+"
    while len(pattern) + block_height + 2 <= height:
        pattern += "B" * block_height + "+"
    return pattern + "+" * (height - 1 - len(pattern)) + "W"


def starts_are_safe(grid: GridMap, starts) -> bool:
    """True if every pod, workstation and start stays reachable with all starts blocked.

    Parked or not-yet-departed AGVs then never cut the floor network.
    """
    blocked = frozenset(starts)
    ws = grid.workstations
    component = grid.main_component(ws + tuple(grid.cells_of(CellKind.STORAGE_POD)), blocked)
    adjacent = lambda c: any(n in component for n in grid.neighbors(c))  # noqa: E731
    if not all(adjacent(w) for w in ws):
        return False
    if not all(adjacent(c) for c in grid.cells_of(CellKind.STORAGE_POD)):
        return False
    return all(adjacent(s) for s in starts)


def random_scenario(
    rng: np.random.Generator,
    grid: GridMap,
    n_tasks: int,
    n_agvs: int,
    timing: TimingModel | None = None,
    energy: EnergyModel | None = None,
    name: str = "random",
    aisle_starts: bool = False,
) -> Scenario:
    """Draw distinct task pods and safe AGV start cells uniformly at random."""
    pods = grid.cells_of(CellKind.STORAGE_POD)
    if n_tasks > len(pods):
        raise ValueError("more tasks than pods")
    floor_kinds = (CellKind.CROSS_AISLE, CellKind.AISLE) if aisle_starts else (CellKind.CROSS_AISLE,)
    floor = [c for k in floor_kinds for c in grid.cells_of(k)]
    task_idx = rng.choice(len(pods), size=n_tasks, replace=False)
    tasks = tuple(Task(i, pods[j]) for i, j in enumerate(task_idx))
    for _ in range(200):
        start_idx = rng.choice(len(floor), size=n_agvs, replace=False)
        starts = [floor[j] for j in start_idx]
        if starts_are_safe(grid, starts):
            break
    else:
        raise ValueError("could not place AGV starts without cutting the floor network")
    agvs = tuple(AgvSpec(i, s) for i, s in enumerate(starts))
    return Scenario(grid, tasks, agvs, timing or TimingModel(), energy or EnergyModel(), name)


def desk_scenario(
    seed: int,
    width: int | None = None,
    height: int | None = None,
    n_tasks: int | None = None,
    n_agvs: int | None = None,
) -> Scenario:
    """Seeded small warehouse (at most 12 x 12, 4 AGVs, 8 tasks unless overridden)."""
    rng = np.random.default_rng(seed)
    width = width or int(rng.integers(8, 13))
    height = height or int(rng.integers(8, 13))
    block_height = int(rng.integers(2, 5))
    n_ws = int(rng.integers(1, 3))
    ws_cols = sorted({int(c) for c in np.linspace(1, width - 2, n_ws + 2)[1:-1].round()})
    grid = GridMap(block_kinds(width, desk_row_pattern(height, block_height), ws_cols))
    n_pods = len(grid.cells_of(CellKind.STORAGE_POD))
    n_agvs = n_agvs or int(rng.integers(1, 5))
    n_tasks = n_tasks or int(rng.integers(n_agvs, 9))
    n_tasks = min(n_tasks, n_pods)
    return random_scenario(rng, grid, n_tasks, n_agvs, name=f"desk-{seed}", aisle_starts=bool(rng.integers(0, 2)))


def full_scenario(seed: int, n_tasks: int, n_agvs: int) -> Scenario:
    return random_scenario(np.random.default_rng(seed), full_grid(), n_tasks, n_agvs, name=f"full-{seed}")
