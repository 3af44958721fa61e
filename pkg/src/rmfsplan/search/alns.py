"""Multi-objective adaptive large neighbourhood search."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..priority import EARLIEST_ARRIVAL, ENERGY
from ..warehouse import Scenario
from .chromosome import ALL_OPERATORS, RANDOM_OPERATORS, random_chromosome
from .evaluation import Budget, Evaluator, InvalidParams, log_record
from .nsga2 import BENCH, IMPROVED
from .pareto import ParetoArchive, dominates


@dataclass(frozen=True)
class AlnsParams:
    """``restart`` starts over from a fresh random solution whenever no
    neighbour improves, instead of stopping, until the budget is spent."""

    budget: Budget = field(default_factory=lambda: Budget(evaluations=400))
    decay: float = 0.8
    neighbors: int = 12
    success_score: float = 2.0
    variant: str = IMPROVED
    priority_mode: str | None = None
    min_count: bool = True
    restart: bool = False
    workers: int = 1

    def validate(self):
        if not 0.0 <= self.decay < 1.0:
            raise InvalidParams("decay must lie in [0, 1)")
        if self.neighbors < 1:
            raise InvalidParams("need at least one neighbour per iteration")
        if self.variant not in (IMPROVED, BENCH):
            raise InvalidParams(f"unknown variant {self.variant!r}")

    @property
    def mode(self) -> str:
        return self.priority_mode or (ENERGY if self.variant == IMPROVED else EARLIEST_ARRIVAL)


class OperatorWeights:
    """Roulette weights, updated as ``w = decay * w + (1 - decay) * score``.

    The operator behind an accepted move scores ``success_score``; all others
    score 1, so an operator that never helps drifts back towards weight 1.
    """

    def __init__(self, names, decay: float = 0.8, success_score: float = 2.0):
        self.names = list(names)
        self.w = np.ones(len(self.names))
        self.decay = decay
        self.success_score = success_score

    def probabilities(self) -> np.ndarray:
        return self.w / self.w.sum()

    def draw(self, rng, size: int) -> list[int]:
        return [int(i) for i in rng.choice(len(self.names), size=size, p=self.probabilities())]

    def reward(self, index: int) -> None:
        score = np.ones(len(self.names))
        score[index] = self.success_score
        self.w = self.decay * self.w + (1 - self.decay) * score

    def as_dict(self) -> dict[str, float]:
        return {n: round(float(w), 12) for n, w in zip(self.names, self.w)}


def alns_run(scenario: Scenario, params: AlnsParams | None = None, seed: int = 0, log: list | None = None) -> ParetoArchive:
    """Dominance-driven local search with adaptive operator selection.

    Each iteration draws ``neighbors`` operators by roulette and applies them
    to the current solution. Scanning the neighbours in order, one that
    dominates the best so far becomes the new best. Without any such
    neighbour the search stops (or restarts); otherwise the best neighbour
    becomes current and its operator is rewarded. The returned archive holds
    the non-dominated points among everything evaluated.
    """
    params = params or AlnsParams()
    params.validate()
    rng = np.random.default_rng(seed)
    task_ids = [t.id for t in scenario.tasks]
    aisles = scenario.task_aisles
    n_agvs = len(scenario.agvs)
    min_count = params.min_count and len(task_ids) >= n_agvs
    operators = ALL_OPERATORS if params.variant == IMPROVED else RANDOM_OPERATORS
    weights = OperatorWeights(operators, params.decay, params.success_score)

    with Evaluator(scenario, params.mode, params.budget, params.workers) as ev:
        cur, cur_obj = ev.evaluate([random_chromosome(rng, task_ids, n_agvs, min_count)])[0]
        it = 0
        while not ev.exhausted():
            draws = weights.draw(rng, params.neighbors)
            neighbours = [(d, operators[weights.names[d]](cur, rng, aisles, min_count)) for d in draws]
            # a move that changed nothing cannot dominate; skip its evaluation
            neighbours = [(d, x) for d, x in neighbours if x != cur]
            best, best_obj, winner = cur, cur_obj, None
            scored = ev.evaluate([x for _, x in neighbours])
            for (d, _), (x, o) in zip(neighbours, scored):
                if dominates(o, best_obj):
                    best, best_obj, winner = x, o, d
            it += 1
            if winner is None:
                if log is not None:
                    log.append(log_record(it, ev.archive, weights.as_dict()))
                if not params.restart:
                    break
                cur, cur_obj = ev.evaluate([random_chromosome(rng, task_ids, n_agvs, min_count)])[0]
                continue
            cur, cur_obj = best, best_obj
            weights.reward(winner)
            if log is not None:
                log.append(log_record(it, ev.archive, weights.as_dict()))
        return ev.archive
