"""Acceptance gate.

Each test checks one acceptance criterion at its pinned size and tolerance
and records a PASS/FAIL line that the terminal summary prints at the end.
"""

from __future__ import annotations

import io
import json
import os
import time
from contextlib import redirect_stdout

import numpy as np
import pytest

from rmfsplan.cli import main
from rmfsplan.experiments import priority_comparison
from rmfsplan.layouts import desk_scenario
from rmfsplan.metrics import (
    css,
    hypervolume,
    ideal_point,
    monte_carlo_hypervolume,
    normalized_hypervolume,
    reference_point,
)
from rmfsplan.oracle import enumerate_assignments, refined_pareto
from rmfsplan.priority import EARLIEST_ARRIVAL, ENERGY, choose_priority
from rmfsplan.routing import ReservationTable, SpaceTimeNode, plan_path
from rmfsplan.search import (
    AlnsParams,
    Budget,
    Chromosome,
    NsgaParams,
    alns_run,
    arc_crossover,
    dominates,
    non_dominated_sort,
    nsga2_run,
    pmx_crossover,
)
from rmfsplan.simulation import Assignment, simulate, validate_schedule
from rmfsplan.warehouse import CellKind, dump_scenario

from .conftest import record_acceptance
from .helpers import (
    bfs_distance,
    brute_fronts,
    collision_fixture,
    enumerate_orderings,
    inclusion_exclusion,
    random_assignment,
    retreat_fixture,
)

# shared desk instances for the two directional criteria
DIRECTIONAL_INSTANCES = [desk_scenario(1000 + i, 12, 12, 8, 3) for i in range(10)]


def test_criterion_01_conflict_free_fuzz():
    began = time.perf_counter()
    bad = []
    for seed in range(1000):
        s = desk_scenario(seed)
        a = random_assignment(s, np.random.default_rng(seed))
        for mode in (ENERGY, EARLIEST_ARRIVAL):
            schedule, _ = simulate(a, s, mode)
            if validate_schedule(schedule, s):
                bad.append((seed, mode))
    elapsed = time.perf_counter() - began
    ok = not bad and elapsed < 300
    record_acceptance(1, "conflict-freedom fuzz", ok, f"{len(bad)} failing runs of 2000, {elapsed:.0f} s")
    assert not bad, bad[:5]
    assert elapsed < 300


def test_criterion_02_router_matches_bfs():
    rng = np.random.default_rng(2)
    kinds = [CellKind.AISLE, CellKind.CROSS_AISLE, CellKind.STORAGE_POD, CellKind.WORKSTATION]
    mismatches = 0
    for seed in range(200):
        s = desk_scenario(20_000 + seed)
        cells = s.grid.cells_of(kinds[int(rng.integers(4))]) or s.grid.cells_of(CellKind.CROSS_AISLE)
        goal = cells[int(rng.integers(len(cells)))]
        start = s.agvs[0].start_cell
        p = plan_path(s.grid, ReservationTable(s.grid.default_horizon()), 0, SpaceTimeNode(start, 0), goal)
        mismatches += p.end.tick != bfs_distance(s.grid, start, goal)
    record_acceptance(2, "router equals breadth-first distance", mismatches == 0, f"{mismatches}/200 mismatches")
    assert mismatches == 0


def test_criterion_03_retreat_fixture():
    grid, table, start, goal = retreat_fixture()
    free = plan_path(grid, ReservationTable(200), 0, start, goal)
    p = plan_path(grid, table, 0, start, goal)
    added = p.resolutions[0].added_time if p.resolutions else None
    extension = p.end.tick - free.end.tick
    ok = added == 2 and extension == 4
    record_acceptance(3, "retreat fixture", ok, f"added_time={added}, extension={extension}")
    assert ok


def test_criterion_04_priority_matches_enumeration():
    mismatches = 0
    sizes = set()
    for seed in range(100):
        grid, table, reqs = collision_fixture(10_000 + seed)
        sizes.add(len(reqs))
        d, _ = choose_priority(grid, table, reqs)
        mismatches += d.key != enumerate_orderings(grid, table, reqs)
    ok = mismatches == 0 and sizes == {2, 3, 4}
    record_acceptance(4, "priority rule equals ordering enumeration", ok, f"{mismatches}/100 mismatches, sizes {sorted(sizes)}")
    assert ok


def test_criterion_05_enumeration_count():
    n = len(enumerate_assignments(range(5), range(3)))
    record_acceptance(5, "5 tasks / 3 AGVs enumeration", n == 720, f"{n} assignments")
    assert n == 720


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_criterion_06_oracle_soundness(seed):
    began = time.perf_counter()
    s = desk_scenario(seed, n_tasks=5, n_agvs=3)
    members = refined_pareto(s).points()
    dominating = 0
    for a in enumerate_assignments(s.tasks, s.agvs):
        o = simulate(a, s)[1].as_tuple()
        dominating += any(dominates(o, p) for p in members)
    elapsed = time.perf_counter() - began
    ok = dominating == 0 and elapsed < 600
    record_acceptance(6, f"oracle soundness, fixture {seed}", ok, f"{dominating} dominating assignments, {elapsed:.0f} s")
    assert ok


def test_criterion_07_metric_oracles():
    rng = np.random.default_rng(7)
    ie_bad = 0
    for _ in range(500):
        d = int(rng.integers(2, 5))
        front = [tuple(int(v) for v in rng.integers(0, 10, d)) for _ in range(int(rng.integers(1, 5)))]
        ref = (10,) * d
        ie_bad += hypervolume(front, ref) != inclusion_exclusion(front, ref)
    mc_bad = 0
    for _ in range(20):
        front = rng.random((10, 4))
        ref = np.full(4, 1.1)
        est, se = monte_carlo_hypervolume(front, ref, rng, samples=200_000)
        mc_bad += abs(est - hypervolume(front, ref)) > 3 * se
    css_ok = (
        css([(1, 1)], [(2, 2), (3, 2)]) == 1
        and css([(1, 3)], [(3, 1)]) == 0
        and css([(2, 2), (3, 2)], [(2, 2), (3, 2)]) == 1
    )
    ok = ie_bad == 0 and mc_bad == 0 and css_ok
    record_acceptance(7, "metric oracles", ok, f"inclusion-exclusion {ie_bad}/500 off, Monte-Carlo {mc_bad}/20 outside 3 sigma")
    assert ok


def test_criterion_08_nsga_machinery():
    rng = np.random.default_rng(8)
    nds_bad = 0
    for _ in range(50):
        pop = [tuple(int(v) for v in rng.integers(0, 6, 4)) for _ in range(int(rng.integers(1, 60)))]
        nds_bad += [sorted(f) for f in non_dominated_sort(pop)] != brute_fronts(pop)
    pmx_bad = 0
    for _ in range(1000):
        n = int(rng.integers(2, 30))
        a = Chromosome(tuple(rng.permutation(n)), (n,))
        b = Chromosome(tuple(rng.permutation(n)), (n,))
        c1, c2 = pmx_crossover(a, b, rng)
        pmx_bad += sorted(c1) != list(range(n)) or sorted(c2) != list(range(n))
    arc_bad = 0
    for _ in range(1000):
        k, n = int(rng.integers(1, 7)), int(rng.integers(1, 40))
        p1 = tuple(rng.multinomial(n, [1 / k] * k))
        p2 = tuple(rng.multinomial(n, [1 / k] * k))
        child = arc_crossover(p1, p2, float(rng.random()), n)
        arc_bad += sum(child) != n or min(child) < 0
    ok = nds_bad == pmx_bad == arc_bad == 0
    record_acceptance(8, "NSGA-II machinery", ok, f"sort {nds_bad}/50, PMX {pmx_bad}/1000, ARC {arc_bad}/1000 failures")
    assert ok


def _improved_vs_bench(run, reps: int = 3) -> tuple[int, list[str]]:
    wins, notes = 0, []
    for i, s in enumerate(DIRECTIONAL_INSTANCES):
        fronts = {(v, r): run(s, v, 100 * i + r) for v in ("improved", "bench") for r in range(reps)}
        ref, ideal = reference_point(fronts.values()), ideal_point(fronts.values())
        mean = {v: np.mean([normalized_hypervolume(fronts[(v, r)], ref, ideal) for r in range(reps)]) for v in ("improved", "bench")}
        wins += bool(mean["improved"] >= mean["bench"])
        notes.append(f"{mean['improved']:.3f}/{mean['bench']:.3f}")
    return wins, notes


# evaluation budget per run, capped at 60 s of wall clock
DIRECTIONAL_BUDGET = Budget(evaluations=300, seconds=60.0)


def test_criterion_09_improved_beats_bench():
    nsga_wins, nsga_notes = _improved_vs_bench(
        lambda s, v, seed: nsga2_run(s, NsgaParams(budget=DIRECTIONAL_BUDGET, variant=v), seed=seed).points()
    )
    alns_wins, alns_notes = _improved_vs_bench(
        lambda s, v, seed: alns_run(s, AlnsParams(budget=DIRECTIONAL_BUDGET, variant=v), seed=seed).points()
    )
    ok = nsga_wins >= 7 and alns_wins >= 7
    record_acceptance(9, "improved variants reach at least bench HV", ok, f"NSGA-II {nsga_wins}/10, ALNS {alns_wins}/10")
    print("NSGA-II improved/bench:", " ".join(nsga_notes))
    print("ALNS improved/bench:", " ".join(alns_notes))
    assert ok


def test_criterion_10_energy_priority_beats_earliest_arrival():
    wins, notes = 0, []
    for i, s in enumerate(DIRECTIONAL_INSTANCES):
        r = priority_comparison(s, samples=50, seed=i)
        wins += r[ENERGY]["hv"] >= r[EARLIEST_ARRIVAL]["hv"]
        notes.append(f"{r[ENERGY]['hv_normalized']:.3f}/{r[EARLIEST_ARRIVAL]['hv_normalized']:.3f}")
    record_acceptance(10, "energy priority reaches at least earliest-arrival HV", wins >= 6, f"{wins}/10 instances")
    print("energy/earliest-arrival:", " ".join(notes))
    assert wins >= 6


def _tree(root) -> dict[str, bytes]:
    out = {}
    for base, _, files in os.walk(root):
        for f in files:
            path = os.path.join(base, f)
            with open(path, "rb") as fh:
                out[os.path.relpath(path, root)] = fh.read()
    return out


def test_criterion_11_cli_determinism(tmp_path):
    s = desk_scenario(11, 10, 10, 5, 2)
    (tmp_path / "scenario.txt").write_text(dump_scenario(s))
    (tmp_path / "assignment.json").write_text(Assignment({0: (0, 1, 2), 1: (3, 4)}).to_json())
    plan = {
        "scenario": "scenario.txt",
        "task_counts": [4],
        "agv_counts": [2],
        "repetitions": 1,
        "budget": "40",
        "seed": 5,
        "algorithms": ["nsga2_improved", "nsga2_bench", "alns_improved", "alns_bench", "oracle"],
    }
    (tmp_path / "plan.json").write_text(json.dumps(plan))
    scen = str(tmp_path / "scenario.txt")

    def commands(out):
        cmds = {
            "simulate": ["simulate", scen, str(tmp_path / "assignment.json"), "--out-dir", f"{out}/simulate"],
            "oracle": ["oracle", scen, "--out-dir", f"{out}/oracle"],
            "plan": ["plan", "run", str(tmp_path / "plan.json"), "--seed", "5", "--out-dir", f"{out}/plan"],
            "validate": ["validate", str(tmp_path / "first" / "simulate" / "events.csv"), "--scenario", scen],
        }
        for alg in ("nsga2_improved", "nsga2_bench", "alns_improved", "alns_bench"):
            cmds[f"search {alg}"] = ["search", scen, "--algorithm", alg, "--seed", "3", "--budget", "40", "--out-dir", f"{out}/{alg}"]
        return cmds

    stdout = {}
    for run in ("first", "second"):
        for name, argv in commands(tmp_path / run).items():
            buf = io.StringIO()
            with redirect_stdout(buf):
                code = main(argv)
            assert code == 0, name
            # the plan command echoes its own output directory
            stdout[(run, name)] = buf.getvalue().replace(str(tmp_path / run), "<out>")
    a, b = _tree(tmp_path / "first"), _tree(tmp_path / "second")
    differing = sorted(k for k in set(a) | set(b) if a.get(k) != b.get(k))
    differing += [n for (r, n) in stdout if r == "first" and stdout[(r, n)] != stdout[("second", n)]]
    ok = bool(a) and not differing
    record_acceptance(11, "CLI byte determinism", ok, f"{len(a)} files and {len(stdout) // 2} stdout streams compared")
    assert ok, differing
