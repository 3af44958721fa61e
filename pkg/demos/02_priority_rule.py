"""Who yields when two AGVs want the same cells.

Both priority rules look at the same pair of colliding trips: a loaded AGV
crossing the whole floor west to east and an unloaded one making a shorter
trip north to south.
"""

from __future__ import annotations

import numpy as np

from rmfsplan.priority import EARLIEST_ARRIVAL, ENERGY, choose_priority, dump_decisions_csv
from rmfsplan.routing import Leg, ReservationTable, SpaceTimeNode, TripRequest
from rmfsplan.warehouse import CellKind, GridMap

kinds = np.full((7, 7), CellKind.CROSS_AISLE)
kinds[6, 3] = CellKind.WORKSTATION
grid = GridMap(kinds)

loaded = TripRequest(0, SpaceTimeNode((0, 3), 0), (Leg((6, 3), True, 0, "move", -1),))
empty = TripRequest(1, SpaceTimeNode((3, 0), 0), (Leg((3, 4), False, 0, "move", -1),))

# %% Energy rule: try every ordering and keep the one that wastes the fewest
# joules. A tick of delay is priced at the AGV's travel rate, 500 J loaded
# against 200 J unloaded, so the loaded AGV should go first.
d, _ = choose_priority(grid, ReservationTable(200), [loaded, empty], mode=ENERGY)
print("energy rule order:", d.ordering)
for agv, (ticks, joules) in sorted(d.per_agv.items()):
    print(f"  AGV {agv}: delayed {ticks} ticks, {joules:.0f} J wasted")

# %% Earliest arrival: whoever would finish first alone goes first. The
# unloaded AGV has the shorter trip, so it wins and the loaded one pays for
# the wait at the higher rate.
d2, _ = choose_priority(grid, ReservationTable(200), [loaded, empty], mode=EARLIEST_ARRIVAL)
print("earliest-arrival order:", d2.ordering, f"({d2.wasted_joules_total:.0f} J wasted)")

# %% The decision log as the simulator writes it.
print(dump_decisions_csv([d]), end="")
