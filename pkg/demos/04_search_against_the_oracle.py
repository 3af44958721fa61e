"""Heuristic search against the exact front on an instance small enough to enumerate.

With five tasks and three AGVs there are 720 assignments, so the refined
oracle front is available and both searches can be scored against it.
"""

from __future__ import annotations

from rmfsplan.layouts import desk_scenario
from rmfsplan.metrics import css, hypervolume, reference_point
from rmfsplan.oracle import enumeration_size, refined_pareto
from rmfsplan.search import AlnsParams, Budget, NsgaParams, alns_run, nsga2_run

scenario = desk_scenario(1, n_tasks=5, n_agvs=3)
print(f"{enumeration_size(5, 3)} assignments to enumerate")

# %% Exact front: enumerate, prune with a collision-free relaxation, then
# simulate the survivors for real.
stages: dict = {}
oracle = refined_pareto(scenario, stages=stages)
print("oracle stages:", stages)

# %% Both searches, improved and benchmark flavours, on 200 simulations each.
budget = Budget(evaluations=200)
fronts = {"oracle": oracle.points()}
for variant in ("improved", "bench"):
    fronts[f"nsga2_{variant}"] = nsga2_run(scenario, NsgaParams(budget=budget, variant=variant), seed=0).points()
    fronts[f"alns_{variant}"] = alns_run(scenario, AlnsParams(budget=budget, variant=variant), seed=0).points()

# %% Hypervolume under one shared reference point, and how much of each
# front the oracle covers.
ref = reference_point(fronts.values())
for name, pts in fronts.items():
    line = f"{name:15s} {len(pts):3d} points  HV {hypervolume(pts, ref):.4g}"
    if name != "oracle":
        line += f"  oracle covers {css(fronts['oracle'], pts):.2f}"
    print(line)
