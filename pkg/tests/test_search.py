from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rmfsplan.layouts import desk_scenario
from rmfsplan.oracle import refined_pareto
from rmfsplan.search import (
    ALL_OPERATORS,
    AlnsParams,
    Budget,
    Chromosome,
    InvalidParams,
    NsgaParams,
    OperatorWeights,
    ParetoArchive,
    alns_run,
    arc_crossover,
    arrangement,
    crowding_distance,
    dominates,
    guided_insertion,
    guided_swap,
    non_dominated_sort,
    nsga2_run,
    pmx,
    pmx_crossover,
    random_arrangement,
    random_chromosome,
)

from .helpers import aisle_grid, brute_fronts, scenario_from


# -- dominance and sorting ----------------------------------------------------


def test_dominance_examples():
    assert dominates((1, 1, 1, 1), (2, 2, 2, 2))
    assert not dominates((1, 2, 1, 1), (2, 1, 2, 2))
    assert not dominates((1, 1, 1, 1), (1, 1, 1, 1))


def test_sorting_examples():
    assert non_dominated_sort([(1, 3), (2, 2), (3, 1)]) == [[0, 1, 2]]
    assert non_dominated_sort([(3, 3), (1, 1), (2, 2)]) == [[1], [2], [0]]


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(*[st.integers(0, 6)] * 4), min_size=1, max_size=50))
def test_sorting_matches_brute_force(pop):
    fronts = non_dominated_sort(pop)
    assert [sorted(f) for f in fronts] == brute_fronts(pop)
    assert sorted(i for f in fronts for i in f) == list(range(len(pop)))


def test_crowding_distance_examples():
    assert np.all(np.isinf(crowding_distance([(1, 2), (2, 1)])))
    d = crowding_distance([(0, 2), (1, 1), (2, 0)])
    assert np.isinf(d[0]) and np.isinf(d[2])
    assert d[1] == pytest.approx(2.0)
    # the second objective is constant and adds nothing
    d = crowding_distance([(0, 5), (1, 5), (3, 5)])
    assert d[1] == pytest.approx(1.0)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(*[st.integers(0, 20)] * 4), min_size=1, max_size=30))
def test_archive_stays_non_dominated(points):
    archive = ParetoArchive()
    for i, p in enumerate(points):
        archive.add(i, p)
    assert archive.is_consistent()
    pts = archive.points()
    assert len(set(pts)) == len(pts)
    # every offered point is weakly covered by the archive
    for p in points:
        assert any(all(a <= b for a, b in zip(q, p)) for q in pts)


# -- crossover ----------------------------------------------------------------


def test_pmx_hand_trace():
    c1, c2 = pmx([1, 2, 3, 4, 5], [5, 4, 3, 2, 1], (1, 3))
    assert c1 == [1, 4, 3, 2, 5]
    assert c2 == [5, 2, 3, 4, 1]


def test_pmx_identical_parents():
    p = Chromosome((3, 1, 2, 0), (2, 2))
    c1, c2 = pmx_crossover(p, p, np.random.default_rng(0))
    assert c1 == c2 == list(p.section1)


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 30), st.integers(0, 2**31 - 1))
def test_pmx_children_are_permutations(n, seed):
    rng = np.random.default_rng(seed)
    for _ in range(50):
        a = Chromosome(tuple(rng.permutation(n)), (n,))
        b = Chromosome(tuple(rng.permutation(n)), (n,))
        c1, c2 = pmx_crossover(a, b, rng)
        assert sorted(c1) == list(range(n)) and sorted(c2) == list(range(n))


def test_arc_examples():
    assert arc_crossover((4, 3), (3, 4), 0.5, 7) == (4, 3)
    assert arc_crossover((4, 3), (3, 4), 1.0, 7) == (4, 3)
    assert arc_crossover((2, 2, 3), (2, 2, 3), 0.5, 7) == (2, 2, 3)
    assert arc_crossover((5, 0, 0), (0, 0, 5), 0.5, 5) == (2, 1, 2)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 6), st.integers(1, 40), st.floats(0, 1), st.integers(0, 2**31 - 1))
def test_arc_conserves_total(k, n, alpha, seed):
    rng = np.random.default_rng(seed)
    p1 = tuple(rng.multinomial(n, [1 / k] * k))
    p2 = tuple(rng.multinomial(n, [1 / k] * k))
    child = arc_crossover(p1, p2, alpha, n)
    assert sum(child) == n and min(child) >= 0


# -- neighbourhood operators ----------------------------------------------------

# task id -> aisle
AISLES = {0: 2, 1: 1, 2: 1, 3: 1, 10: 1, 11: 2, 12: 3}


def test_guided_swap_pulls_dense_aisle_task():
    # A (slower) holds aisles [2, 1, 1, 1]; B holds [1, 2, 3]
    x = Chromosome((0, 1, 2, 3, 10, 11, 12), (4, 3), times=(100, 50))
    y = guided_swap(x, np.random.default_rng(0), AISLES)
    assert y.groups() == [[10, 1, 2, 3], [0, 11, 12]]
    assert y.section2 == x.section2


def test_guided_swap_without_match_is_identity():
    x = Chromosome((0, 1, 2, 3, 11, 12), (4, 2), times=(100, 50))
    assert guided_swap(x, np.random.default_rng(0), AISLES) is x


def test_guided_insertion_moves_fifth_task():
    aisles = {0: 1, 1: 3, 2: 1, 3: 3, 4: 2, 10: 2, 11: 2, 12: 1}
    x = Chromosome((0, 1, 2, 3, 4, 10, 11, 12), (5, 3), times=(90, 40))
    for seed in range(10):
        y = guided_insertion(x, np.random.default_rng(seed), aisles)
        ga, gb = y.groups()
        assert ga == [0, 1, 2, 3]
        assert sorted(gb) == [4, 10, 11, 12]
        assert [t for t in gb if t != 4] == [10, 11, 12]
        assert sum(y.section2) == 8


def test_guided_insertion_keeps_last_task_under_min_count():
    aisles = {0: 2, 10: 2, 11: 2}
    x = Chromosome((0, 10, 11), (1, 2), times=(90, 40))
    assert guided_insertion(x, np.random.default_rng(0), aisles) is x


def test_arrangement_groups_by_first_occurrence():
    aisles = {0: 1, 1: 2, 2: 1, 3: 3, 4: 2}
    x = Chromosome((0, 1, 2, 3, 4), (5,))
    y = arrangement(x, 0, aisles=aisles)
    assert [aisles[t] for t in y.section1] == [1, 1, 2, 2, 3]
    assert y.section1 == (0, 2, 1, 4, 3)
    assert arrangement(y, 0, aisles=aisles) == y


def test_random_arrangement_single_aisle_is_identity():
    x = Chromosome((1, 2, 3), (3,))
    assert random_arrangement(x, np.random.default_rng(0), AISLES) is x


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 12), st.integers(1, 5), st.booleans(), st.integers(0, 2**31 - 1))
def test_every_operator_keeps_chromosomes_valid(n, k, min_count, seed):
    rng = np.random.default_rng(seed)
    ids = list(range(n))
    aisles = {t: int(rng.integers(4)) for t in ids}
    min_count = min_count and n >= k
    x = random_chromosome(rng, ids, k, min_count)
    for _ in range(50):
        name = sorted(ALL_OPERATORS)[int(rng.integers(6))]
        x = ALL_OPERATORS[name](x.with_times(rng.integers(0, 100, size=k)), rng, aisles, min_count)
        assert x.is_valid(ids, min_count), name


# -- ALNS weights ---------------------------------------------------------------


def test_operator_weights_update():
    w = OperatorWeights(sorted(ALL_OPERATORS), decay=0.8, success_score=2.0)
    assert np.allclose(w.probabilities(), 1 / 6)
    i = w.names.index("guided_swap")
    w.reward(i)
    assert w.w[i] == pytest.approx(1.2)
    assert np.allclose(np.delete(w.w, i), 1.0)
    assert w.probabilities()[i] > 1 / 6
    last = w.probabilities()[i]
    for _ in range(20):
        w.reward(i)
        p = w.probabilities()
        assert np.all(w.w > 0) and p.sum() == pytest.approx(1.0)
        assert p[i] >= last
        last = p[i]


# -- whole runs -----------------------------------------------------------------


def test_budget_parsing():
    assert Budget.parse("200") == Budget(evaluations=200)
    assert Budget.parse("30s") == Budget(seconds=30.0)
    assert Budget.parse("200/30s") == Budget(200, 30.0)
    with pytest.raises(InvalidParams):
        Budget.parse("soon")
    with pytest.raises(InvalidParams):
        NsgaParams(population=4, parents=4).validate()
    with pytest.raises(InvalidParams):
        AlnsParams(decay=1.5).validate()


def test_single_task_single_agv():
    s = scenario_from(aisle_grid(), [(6, 0)], [(0, 3)])
    small = NsgaParams(population=4, parents=2, budget=Budget(evaluations=10))
    archive = nsga2_run(s, small, seed=1)
    assert len(archive) == 1
    assert archive.entries[0][0].groups() == [[0]]
    archive = alns_run(s, AlnsParams(budget=Budget(evaluations=10)), seed=1)
    assert len(archive) == 1


@pytest.mark.parametrize("variant", ["improved", "bench"])
def test_runs_are_reproducible_and_consistent(variant):
    s = desk_scenario(7, n_tasks=6, n_agvs=2)
    b = Budget(evaluations=60)
    n1 = nsga2_run(s, NsgaParams(population=10, parents=4, budget=b, variant=variant), seed=3)
    n2 = nsga2_run(s, NsgaParams(population=10, parents=4, budget=b, variant=variant), seed=3)
    assert n1.points() == n2.points() and n1.is_consistent()
    a1 = alns_run(s, AlnsParams(budget=b, variant=variant), seed=3)
    a2 = alns_run(s, AlnsParams(budget=b, variant=variant), seed=3)
    assert a1.points() == a2.points() and a1.is_consistent()


def test_search_never_beats_the_exact_front():
    s = desk_scenario(1, n_tasks=5, n_agvs=3)
    front = refined_pareto(s).points()
    for archive in (
        nsga2_run(s, NsgaParams(budget=Budget(evaluations=200)), seed=0),
        alns_run(s, AlnsParams(budget=Budget(evaluations=200)), seed=0),
    ):
        for p in archive.points():
            assert not any(dominates(p, q) for q in front)
