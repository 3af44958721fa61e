"""Routing one AGV through a single-lane aisle, alone and against oncoming traffic.

Run with ``python demos/01_routing_and_retreat.py``.
"""

from __future__ import annotations

import numpy as np

from rmfsplan.routing import ReservationTable, SpaceTimeNode, path_from_cells, plan_path
from rmfsplan.warehouse import CellKind, GridMap

P, A, C, W = CellKind.STORAGE_POD, CellKind.AISLE, CellKind.CROSS_AISLE, CellKind.WORKSTATION

# %% A small block: two rows of pods with a one-cell aisle between them.
kinds = np.array(
    [
        [C, P, P, P, P, P, P, P, P, C],
        [C, A, A, A, A, A, A, A, A, C],
        [C, P, P, P, P, P, P, P, P, C],
        [C, C, C, C, W, C, C, C, C, C],
    ]
)
grid = GridMap(kinds)
symbol = {P: "#", A: ".", C: "+", W: "W"}
print("\n".join(" ".join(symbol[CellKind(k)] for k in row) for row in kinds))

# %% Alone, AGV 0 walks straight down the aisle to the pod at (8, 0).
start, goal = SpaceTimeNode((0, 1), 0), (8, 0)
free = plan_path(grid, ReservationTable(200), 0, start, goal)
print("free path:", [n.cell for n in free.nodes])
print(f"arrives at tick {free.end.tick} using {free.total_joules:.0f} J")

# %% AGV 1 comes the other way and parks in a side cell at tick 6.
table = ReservationTable(200)
oncoming = path_from_cells(1, [(8 - t, 1) for t in range(6)] + [(3, 2)], 0)
table.claim_path(oncoming)
table.park(1, (3, 2), 6)

# %% AGV 0 now meets it head-on inside the aisle. It backs off to a pivot,
# waits for the aisle to clear and comes back; the detour costs twice the
# retreat length.
p = plan_path(grid, table, 0, start, goal)
for r in p.resolutions:
    print(f"met AGV {r.blocker} at {r.colliding.cell} tick {r.colliding.tick}: "
          f"retreat {r.added_time} step(s) to {r.pivot.cell}, back on track at tick {r.emitted.tick}")
print(f"arrives at tick {p.end.tick}, {p.end.tick - free.end.tick} ticks later than alone")
