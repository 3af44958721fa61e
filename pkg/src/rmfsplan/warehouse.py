"""Scenario model: grid geometry, tasks, AGVs, timing and energy constants.

A scenario document is plain UTF-8 text::

    rmfs-scenario v1
    name = demo
    pick_dwell = 8
    map:
    + + + + +
    + # T0 # +
    + . . . +
    + A0 W A1 +

Map tokens are whitespace separated, one token per cell:

    ``.``     aisle floor
    ``+``     cross-aisle floor
    ``#``     storage pod
    ``W``     workstation
    ``T<n>``  storage pod holding task ``n``
    ``A<n>``  AGV ``n`` starting on a cross-aisle cell
    ``a<n>``  AGV ``n`` starting on an aisle cell

Tasks and AGVs may also be declared with ``task.<n> = x y`` and
``agv.<n> = x y`` lines, which is how generated layouts attach random task
sets to a fixed map.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

Cell = tuple[int, int]

HEADER = "rmfs-scenario v1"

# N, E, S, W with y growing downwards (row index).
DIRECTIONS: tuple[Cell, ...] = ((0, -1), (1, 0), (0, 1), (-1, 0))


class ScenarioError(ValueError):
    """Raised for malformed scenario documents or violated scenario invariants."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class CellKind(enum.IntEnum):
    STORAGE_POD = 0
    AISLE = 1
    CROSS_AISLE = 2
    WORKSTATION = 3


FLOOR_KINDS = (CellKind.AISLE, CellKind.CROSS_AISLE)

_KIND_TOKENS = {
    ".": CellKind.AISLE,
    "+": CellKind.CROSS_AISLE,
    "#": CellKind.STORAGE_POD,
    "W": CellKind.WORKSTATION,
}
_TOKEN_OF_KIND = {kind: token for token, kind in _KIND_TOKENS.items()}


@dataclass(frozen=True)
class Task:
    id: int
    pod_cell: Cell


@dataclass(frozen=True)
class AgvSpec:
    id: int
    start_cell: Cell


@dataclass(frozen=True)
class TimingModel:
    """Dwell times in ticks. One tick is one second; AGVs move one cell per tick."""

    pick_dwell: int = 8
    release_dwell: int = 3
    workstation_dwell: int = 8

    def __post_init__(self):
        for name in ("pick_dwell", "release_dwell", "workstation_dwell"):
            if getattr(self, name) < 1:
                raise ScenarioError(f"{name} must be at least 1 tick")


@dataclass(frozen=True)
class EnergyModel:
    """Joules per metre travelled (loaded / unloaded) and per tick spent waiting."""

    loaded_j_per_m: float = 500.0
    unloaded_j_per_m: float = 200.0
    wait_j_per_tick: float = 0.0

    def __post_init__(self):
        if not self.loaded_j_per_m > self.unloaded_j_per_m > 0:
            raise ScenarioError("energy rates must satisfy loaded > unloaded > 0")
        if self.wait_j_per_tick < 0:
            raise ScenarioError("wait_j_per_tick must be non-negative")

    def rate(self, loaded: bool) -> float:
        return self.loaded_j_per_m if loaded else self.unloaded_j_per_m


def step_energy(loaded: bool, moved: bool, energy: EnergyModel) -> float:
    """Energy spent over one tick."""
    if not moved:
        return energy.wait_j_per_tick
    return energy.rate(loaded)


def manhattan_distance(p: Cell, q: Cell) -> int:
    return abs(p[0] - q[0]) + abs(p[1] - q[1])


class GridMap:
    """Cell-typed warehouse grid.

    ``kinds[y, x]`` holds the :class:`CellKind` of cell ``(x, y)`` and
    ``aisle_ids[y, x]`` its aisle index, or -1 outside aisles. An aisle is a
    straight run of aisle floor; cross-aisles may cut it into several
    4-connected segments, which keep one id. Ids are numbered in row-major
    order of first appearance; each storage pod inherits the id of its first
    adjacent aisle cell (N, E, S, W).

    Pods and workstations are obstacles except for an AGV whose current goal
    they are, so they never appear as intermediate path cells.
    """

    def __init__(self, kinds: np.ndarray, aisle_ids: np.ndarray | None = None):
        kinds = np.asarray(kinds, dtype=np.int8).copy()
        if kinds.ndim != 2 or kinds.size == 0:
            raise ScenarioError("grid must be a non-empty 2-D array")
        if aisle_ids is None:
            aisle_ids = _derive_aisles(kinds)
        aisle_ids = np.asarray(aisle_ids, dtype=np.int32).copy()
        kinds.setflags(write=False)
        aisle_ids.setflags(write=False)
        self.kinds = kinds
        self.aisle_ids = aisle_ids
        self.height, self.width = kinds.shape
        self._distance_cache: dict[Cell, np.ndarray] = {}

    def __eq__(self, other):
        if not isinstance(other, GridMap):
            return NotImplemented
        return np.array_equal(self.kinds, other.kinds) and np.array_equal(self.aisle_ids, other.aisle_ids)

    def __hash__(self):
        return hash((self.kinds.tobytes(), self.kinds.shape))

    def __repr__(self):
        return f"GridMap(width={self.width}, height={self.height})"

    def in_bounds(self, c: Cell) -> bool:
        return 0 <= c[0] < self.width and 0 <= c[1] < self.height

    def kind(self, c: Cell) -> CellKind:
        return CellKind(int(self.kinds[c[1], c[0]]))

    def aisle_id(self, c: Cell) -> int | None:
        a = int(self.aisle_ids[c[1], c[0]])
        return None if a < 0 else a

    def in_aisle(self, c: Cell) -> bool:
        return self.aisle_ids[c[1], c[0]] >= 0

    def is_floor(self, c: Cell) -> bool:
        return self.kinds[c[1], c[0]] in (CellKind.AISLE, CellKind.CROSS_AISLE)

    def cells_of(self, kind: CellKind) -> list[Cell]:
        ys, xs = np.nonzero(self.kinds == kind)
        return [(int(x), int(y)) for y, x in zip(ys, xs)]

    @cached_property
    def workstations(self) -> tuple[Cell, ...]:
        # row-major order defines the workstation index
        return tuple(sorted(self.cells_of(CellKind.WORKSTATION), key=lambda c: (c[1], c[0])))

    @cached_property
    def _floor_neighbors(self) -> dict[Cell, tuple[Cell, ...]]:
        out = {}
        for y in range(self.height):
            for x in range(self.width):
                out[(x, y)] = tuple(
                    (x + dx, y + dy)
                    for dx, dy in DIRECTIONS
                    if self.in_bounds((x + dx, y + dy)) and self.is_floor((x + dx, y + dy))
                )
        return out

    def neighbors(self, c: Cell, target: Cell | None = None) -> list[Cell]:
        """Traversable 4-neighbours of ``c`` in N, E, S, W order.

        Floor cells are always traversable; ``target`` (a pod or workstation
        the AGV is heading for) is the only non-floor cell that may be entered.
        """
        if target is None or manhattan_distance(c, target) != 1:
            return list(self._floor_neighbors[c])
        x, y = c
        out = []
        for dx, dy in DIRECTIONS:
            n = (x + dx, y + dy)
            if self.in_bounds(n) and (n == target or self.is_floor(n)):
                out.append(n)
        return out

    def distances_from(self, source: Cell) -> np.ndarray:
        """Travel distances (ticks) from ``source`` to every cell, ignoring other AGVs.

        Intermediate cells are floor only; pods and workstations get the
        distance at which they could be entered as a target. Unreachable cells
        hold -1. Results are cached per source.
        """
        cached = self._distance_cache.get(source)
        if cached is not None:
            return cached
        dist = np.full((self.height, self.width), -1, dtype=np.int64)
        dist[source[1], source[0]] = 0
        queue = deque([source])
        while queue:
            c = queue.popleft()
            d = dist[c[1], c[0]]
            for dx, dy in DIRECTIONS:
                n = (c[0] + dx, c[1] + dy)
                if not self.in_bounds(n) or dist[n[1], n[0]] >= 0:
                    continue
                dist[n[1], n[0]] = d + 1
                if self.is_floor(n):
                    queue.append(n)
        dist.setflags(write=False)
        self._distance_cache[source] = dist
        return dist

    def travel_distance(self, p: Cell, q: Cell) -> int:
        d = int(self.distances_from(p)[q[1], q[0]])
        if d < 0:
            raise ScenarioError(f"cell {q} unreachable from {p}")
        return d

    def nearest_workstation(self, c: Cell) -> Cell:
        """Closest workstation by Manhattan distance; ties go to the lowest index."""
        if not self.workstations:
            raise ScenarioError("grid has no workstation")
        return min(self.workstations, key=lambda w: manhattan_distance(c, w))

    def default_horizon(self) -> int:
        return 8 * (self.width + self.height)

    def floor_components(self, blocked: frozenset[Cell] = frozenset()) -> list[set[Cell]]:
        """4-connected components of the floor, avoiding ``blocked``, in row-major order."""
        seen: set[Cell] = set()
        out = []
        for y in range(self.height):
            for x in range(self.width):
                c = (x, y)
                if c in seen or c in blocked or not self.is_floor(c):
                    continue
                comp = {c}
                queue = deque([c])
                while queue:
                    for n in self._floor_neighbors[queue.popleft()]:
                        if n not in comp and n not in blocked:
                            comp.add(n)
                            queue.append(n)
                seen |= comp
                out.append(comp)
        return out

    def main_component(self, required, blocked: frozenset[Cell] = frozenset()) -> set[Cell]:
        """The floor component touching most of ``required`` (ties to the first).

        A floor cell touches the component by lying in it; pods and
        workstations touch it through a floor neighbour, since they cannot
        be crossed.
        """
        best: set[Cell] = set()
        best_n = -1
        for comp in self.floor_components(blocked):
            n = sum(self._touches(c, comp) for c in required)
            if n > best_n:
                best, best_n = comp, n
        return best

    def _touches(self, c: Cell, comp: set[Cell]) -> bool:
        if self.is_floor(c):
            return c in comp
        return any(n in comp for n in self._floor_neighbors[c])

    def connectivity_violations(self, starts: tuple[Cell, ...] = ()) -> list[str]:
        """Workstations, pods and start cells outside one common floor component."""
        if not self.workstations:
            return ["grid has no workstation"]
        required = self.workstations + tuple(self.cells_of(CellKind.STORAGE_POD)) + tuple(starts)
        component = self.main_component(required)
        problems = []
        for c in self.workstations + tuple(self.cells_of(CellKind.STORAGE_POD)):
            if not self._touches(c, component):
                problems.append(f"{self.kind(c).name.lower()} {c} is disconnected")
        for s in starts:
            if s not in component:
                problems.append(f"start cell {s} is disconnected")
        return problems


def _derive_aisles(kinds: np.ndarray) -> np.ndarray:
    h, w = kinds.shape
    comp = np.full((h, w), -1, dtype=np.int32)
    lines: list[tuple] = []
    for y in range(h):
        for x in range(w):
            if kinds[y, x] != CellKind.AISLE or comp[y, x] >= 0:
                continue
            cid = len(lines)
            comp[y, x] = cid
            cells = [(x, y)]
            queue = deque([(x, y)])
            while queue:
                cx, cy = queue.popleft()
                for dx, dy in DIRECTIONS:
                    nx, ny = cx + dx, cy + dy
                    if 0 <= nx < w and 0 <= ny < h and kinds[ny, nx] == CellKind.AISLE and comp[ny, nx] < 0:
                        comp[ny, nx] = cid
                        cells.append((nx, ny))
                        queue.append((nx, ny))
            xs = {c[0] for c in cells}
            ys = {c[1] for c in cells}
            # A cross-aisle cuts an aisle into segments without making them
            # different aisles: segments on one line share an id.
            if len(xs) == 1 and len(ys) > 1:
                lines.append(("column", xs.pop()))
            elif len(ys) == 1 and len(xs) > 1:
                lines.append(("row", ys.pop()))
            else:
                lines.append(("component", cid))
    line_id: dict[tuple, int] = {}
    for key in lines:
        line_id.setdefault(key, len(line_id))
    ids = np.full((h, w), -1, dtype=np.int32)
    mask = comp >= 0
    ids[mask] = [line_id[lines[c]] for c in comp[mask]]
    for y in range(h):
        for x in range(w):
            if kinds[y, x] != CellKind.STORAGE_POD:
                continue
            for dx, dy in DIRECTIONS:
                nx, ny = x + dx, y + dy
                if 0 <= nx < w and 0 <= ny < h and kinds[ny, nx] == CellKind.AISLE:
                    ids[y, x] = ids[ny, nx]
                    break
    return ids


@dataclass(frozen=True)
class Scenario:
    grid: GridMap
    tasks: tuple[Task, ...]
    agvs: tuple[AgvSpec, ...]
    timing: TimingModel = field(default_factory=TimingModel)
    energy: EnergyModel = field(default_factory=EnergyModel)
    name: str = "scenario"

    def __post_init__(self):
        validate_scenario(self)

    def __iter__(self):
        return iter((self.grid, self.tasks, self.agvs, self.timing, self.energy))

    @cached_property
    def task_by_id(self) -> dict[int, Task]:
        return {t.id: t for t in self.tasks}

    @cached_property
    def agv_by_id(self) -> dict[int, AgvSpec]:
        return {a.id: a for a in self.agvs}

    @cached_property
    def task_aisles(self) -> dict[int, int]:
        return {t.id: self.grid.aisle_id(t.pod_cell) for t in self.tasks}

    def with_tasks(self, tasks) -> Scenario:
        return Scenario(self.grid, tuple(tasks), self.agvs, self.timing, self.energy, self.name)


def validate_scenario(s: Scenario) -> None:
    grid = s.grid
    if not grid.workstations:
        raise ScenarioError("grid has no workstation")
    for c in grid.cells_of(CellKind.STORAGE_POD):
        if grid.aisle_id(c) is None:
            raise ScenarioError(f"storage cell without aisle at {c}")
    for kind in (CellKind.WORKSTATION, CellKind.CROSS_AISLE):
        for c in grid.cells_of(kind):
            if grid.aisle_id(c) is not None:
                raise ScenarioError(f"{kind.name.lower()} cell {c} carries an aisle id")
    seen_ids: set[int] = set()
    seen_pods: set[Cell] = set()
    for t in s.tasks:
        if t.id in seen_ids:
            raise ScenarioError(f"duplicate task id {t.id}")
        if not grid.in_bounds(t.pod_cell) or grid.kind(t.pod_cell) != CellKind.STORAGE_POD:
            raise ScenarioError(f"task {t.id} is not on a storage pod")
        if t.pod_cell in seen_pods:
            raise ScenarioError(f"duplicate task pod {t.pod_cell}")
        seen_ids.add(t.id)
        seen_pods.add(t.pod_cell)
    seen_ids.clear()
    starts: set[Cell] = set()
    for a in s.agvs:
        if a.id in seen_ids:
            raise ScenarioError(f"duplicate agv id {a.id}")
        if not grid.in_bounds(a.start_cell) or not grid.is_floor(a.start_cell):
            raise ScenarioError(f"agv {a.id} does not start on floor")
        if a.start_cell in starts:
            raise ScenarioError("duplicate start cell")
        seen_ids.add(a.id)
        starts.add(a.start_cell)
    problems = grid.connectivity_violations(tuple(a.start_cell for a in s.agvs))
    if problems:
        raise ScenarioError("grid is not connected: " + "; ".join(problems))


_INT_KEYS = ("pick_dwell", "release_dwell", "workstation_dwell")
_FLOAT_KEYS = ("loaded_j_per_m", "unloaded_j_per_m", "wait_j_per_tick")


def load_scenario(text: str) -> Scenario:
    """Parse and validate a scenario document."""
    lines = text.splitlines()
    numbered = [(i + 1, ln.strip()) for i, ln in enumerate(lines)]
    numbered = [(i, ln) for i, ln in numbered if ln and not ln.startswith("#")]
    if not numbered or numbered[0][1] != HEADER:
        raise ScenarioError(f"missing header {HEADER!r}", numbered[0][0] if numbered else 1)

    values: dict[str, str] = {}
    agv_cells: dict[int, tuple[Cell, int]] = {}
    task_cells: dict[int, tuple[Cell, int]] = {}
    rows: list[tuple[int, list[str]]] = []
    in_map = False
    for lineno, ln in numbered[1:]:
        if in_map:
            rows.append((lineno, ln.split()))
            continue
        if ln == "map:":
            in_map = True
            continue
        if "=" not in ln:
            raise ScenarioError(f"expected 'key = value', got {ln!r}", lineno)
        key, _, value = (part.strip() for part in ln.partition("="))
        if key.startswith(("agv.", "task.")):
            kind, _, ident = key.partition(".")
            try:
                ident_n = int(ident)
                x, y = (int(v) for v in value.split())
            except ValueError:
                raise ScenarioError(f"bad {kind} declaration {ln!r}", lineno) from None
            target = agv_cells if kind == "agv" else task_cells
            if ident_n in target:
                raise ScenarioError(f"duplicate {kind} id {ident_n}", lineno)
            target[ident_n] = ((x, y), lineno)
        elif key in _INT_KEYS or key in _FLOAT_KEYS or key == "name":
            values[key] = value
        else:
            raise ScenarioError(f"unknown key {key!r}", lineno)
    if not rows:
        raise ScenarioError("missing map section", numbered[-1][0])

    width = len(rows[0][1])
    kinds = np.zeros((len(rows), width), dtype=np.int8)
    for y, (lineno, tokens) in enumerate(rows):
        if len(tokens) != width:
            raise ScenarioError(f"map row has {len(tokens)} cells, expected {width}", lineno)
        for x, tok in enumerate(tokens):
            if tok in _KIND_TOKENS:
                kinds[y, x] = _KIND_TOKENS[tok]
                continue
            head, num = tok[0], tok[1:]
            if head not in "ATa" or not num.isdigit():
                raise ScenarioError(f"unknown map token {tok!r}", lineno)
            n = int(num)
            target = task_cells if head == "T" else agv_cells
            if n in target:
                raise ScenarioError(f"duplicate {'task' if head == 'T' else 'agv'} id {n}", lineno)
            target[n] = ((x, y), lineno)
            kinds[y, x] = {"T": CellKind.STORAGE_POD, "A": CellKind.CROSS_AISLE, "a": CellKind.AISLE}[head]

    try:
        timing = TimingModel(**{k: int(values[k]) for k in _INT_KEYS if k in values})
        energy = EnergyModel(**{k: float(values[k]) for k in _FLOAT_KEYS if k in values})
    except ValueError as exc:
        raise ScenarioError(f"bad numeric field: {exc}") from None
    grid = GridMap(kinds)
    tasks = tuple(Task(i, c) for i, (c, _) in sorted(task_cells.items()))
    agvs = tuple(AgvSpec(i, c) for i, (c, _) in sorted(agv_cells.items()))
    return Scenario(grid, tasks, agvs, timing, energy, values.get("name", "scenario"))


def _fmt_number(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def dump_scenario(s: Scenario) -> str:
    """Serialize a scenario; ``load_scenario(dump_scenario(s)) == s``."""
    grid = s.grid
    tokens = [[_TOKEN_OF_KIND[CellKind(int(k))] for k in row] for row in grid.kinds]
    for t in s.tasks:
        tokens[t.pod_cell[1]][t.pod_cell[0]] = f"T{t.id}"
    for a in s.agvs:
        prefix = "a" if grid.kind(a.start_cell) == CellKind.AISLE else "A"
        tokens[a.start_cell[1]][a.start_cell[0]] = f"{prefix}{a.id}"
    out = [HEADER, f"name = {s.name}"]
    for k in _INT_KEYS:
        out.append(f"{k} = {getattr(s.timing, k)}")
    for k in _FLOAT_KEYS:
        out.append(f"{k} = {_fmt_number(getattr(s.energy, k))}")
    out.append("map:")
    width = max(len(tok) for row in tokens for tok in row)
    out.extend(" ".join(tok.ljust(width) for tok in row).rstrip() for row in tokens)
    return "\n".join(out) + "\n"


def read_scenario(path) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        return load_scenario(fh.read())
