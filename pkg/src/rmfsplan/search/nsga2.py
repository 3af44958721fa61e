"""NSGA-II over two-section chromosomes."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..priority import EARLIEST_ARRIVAL, ENERGY
from ..warehouse import Scenario
from .chromosome import (
    GUIDED_OPERATORS,
    RANDOM_OPERATORS,
    Chromosome,
    arc_crossover,
    pmx_crossover,
    random_chromosome,
)
from .evaluation import Budget, Evaluator, InvalidParams, log_record
from .pareto import ParetoArchive, crowding_distance, non_dominated_sort

IMPROVED = "improved"
BENCH = "bench"


@dataclass(frozen=True)
class NsgaParams:
    """``alpha=None`` draws the ARC weight uniformly for every crossover.

    ``variant="improved"`` recombines counts with ARC and mutates with the
    guided operators under the energy priority rule; ``"bench"`` keeps the
    first parent's counts, mutates with random operators and arbitrates
    collisions by earliest arrival."""

    population: int = 20
    parents: int = 10
    alpha: float | None = None
    budget: Budget = field(default_factory=lambda: Budget(evaluations=400))
    variant: str = IMPROVED
    priority_mode: str | None = None
    min_count: bool = True
    workers: int = 1

    def validate(self):
        if not self.population > self.parents >= 2:
            raise InvalidParams("need population > parents >= 2")
        if self.alpha is not None and not 0.0 <= self.alpha <= 1.0:
            raise InvalidParams("alpha must lie in [0, 1]")
        if self.variant not in (IMPROVED, BENCH):
            raise InvalidParams(f"unknown variant {self.variant!r}")

    @property
    def mode(self) -> str:
        return self.priority_mode or (ENERGY if self.variant == IMPROVED else EARLIEST_ARRIVAL)


def rank_order(objs) -> list[int]:
    """Indices sorted by front, then by decreasing crowding distance, then index."""
    order = []
    for front in non_dominated_sort(objs):
        cd = crowding_distance([objs[i] for i in front])
        order += [front[k] for k in sorted(range(len(front)), key=lambda k: (-cd[k], front[k]))]
    return order


def mutate(x: Chromosome, operators: dict, rng, aisles, min_count: bool) -> Chromosome:
    """Apply operators in random order until one changes ``x``."""
    names = sorted(operators)
    for i in rng.permutation(len(names)):
        child = operators[names[int(i)]](x, rng, aisles, min_count)
        if child != x:
            return child
    return x


def nsga2_run(scenario: Scenario, params: NsgaParams | None = None, seed: int = 0, log: list | None = None) -> ParetoArchive:
    """Evolve assignments until the budget is spent; return the archive of all evaluated points.

    Each generation keeps the best ``parents`` solutions. A random half of them
    breed by PMX on the task order (plus ARC on the counts for the improved
    variant); the other half are mutated by neighbourhood operators. Children
    fill the remaining ``population - parents`` slots.
    """
    params = params or NsgaParams()
    params.validate()
    rng = np.random.default_rng(seed)
    task_ids = [t.id for t in scenario.tasks]
    aisles = scenario.task_aisles
    n_agvs = len(scenario.agvs)
    min_count = params.min_count and len(task_ids) >= n_agvs
    operators = GUIDED_OPERATORS if params.variant == IMPROVED else RANDOM_OPERATORS
    m = params.parents
    n_off = params.population - m

    with Evaluator(scenario, params.mode, params.budget, params.workers) as ev:
        pop = [random_chromosome(rng, task_ids, n_agvs, min_count) for _ in range(params.population)]
        scored = ev.evaluate(pop)
        gen = 0
        if log is not None:
            log.append(log_record(gen, ev.archive))
        while not ev.exhausted():
            order = rank_order([o for _, o in scored])
            elite = [scored[i] for i in order[:m]]
            shuffled = [elite[int(i)][0] for i in rng.permutation(m)]
            breeders, mutants = shuffled[: m // 2], shuffled[m // 2 :]

            children: list[Chromosome] = []
            while len(children) < n_off // 2:
                i, j = (0, 0) if len(breeders) < 2 else (int(k) for k in rng.choice(len(breeders), size=2, replace=False))
                a, b = breeders[i], breeders[j]
                s1, s2 = pmx_crossover(a, b, rng)
                if params.variant == IMPROVED:
                    alpha = float(rng.random()) if params.alpha is None else params.alpha
                    c1 = arc_crossover(a.section2, b.section2, alpha, len(task_ids))
                    c2 = arc_crossover(b.section2, a.section2, alpha, len(task_ids))
                else:
                    c1, c2 = a.section2, b.section2
                children += [Chromosome(s1, c1), Chromosome(s2, c2)]
            children = children[: n_off // 2]
            k = 0
            while len(children) < n_off:
                parent = mutants[k % len(mutants)]
                k += 1
                children.append(mutate(parent, operators, rng, aisles, min_count))

            scored = elite + ev.evaluate(children)
            gen += 1
            if log is not None:
                log.append(log_record(gen, ev.archive))
        return ev.archive
