"""Budgeted, cached evaluation of chromosomes by full simulation."""

from __future__ import annotations

import json
import math
import re
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from ..priority import ENERGY
from ..simulation import Assignment, ObjectiveVector, SimulationStuck, simulate
from ..warehouse import Scenario
from .chromosome import Chromosome
from .pareto import ParetoArchive

STALL_FACTOR = 20
INFEASIBLE = ObjectiveVector(math.inf, math.inf, math.inf, math.inf)


class InvalidParams(ValueError):
    pass


@dataclass(frozen=True)
class Budget:
    """Stop after ``evaluations`` simulations or ``seconds`` of wall time, whichever comes first."""

    evaluations: int | None = None
    seconds: float | None = None

    def __post_init__(self):
        if self.evaluations is None and self.seconds is None:
            raise InvalidParams("budget needs an evaluation count or a time limit")
        if (self.evaluations is not None and self.evaluations <= 0) or (self.seconds is not None and self.seconds <= 0):
            raise InvalidParams("budget must be positive")

    @classmethod
    def parse(cls, text) -> Budget:
        """``"200"`` is 200 evaluations, ``"30s"`` 30 seconds, ``"200/30s"`` both."""
        if isinstance(text, Budget):
            return text
        if isinstance(text, (int, float)):
            return cls(evaluations=int(text))
        evals, secs = None, None
        for part in str(text).split("/"):
            m = re.fullmatch(r"\s*(\d+(?:\.\d+)?)\s*(s?)\s*", part)
            if not m:
                raise InvalidParams(f"bad budget {text!r}")
            if m.group(2):
                secs = float(m.group(1))
            else:
                evals = int(float(m.group(1)))
        return cls(evals, secs)

    def __str__(self):
        parts = []
        if self.evaluations is not None:
            parts.append(str(self.evaluations))
        if self.seconds is not None:
            parts.append(f"{self.seconds:g}s")
        return "/".join(parts)


_WORKER_SCENARIO = None


def _init_worker(scenario, mode):
    global _WORKER_SCENARIO
    _WORKER_SCENARIO = (scenario, mode)


def _simulate_one(assignment: Assignment):
    scenario, mode = _WORKER_SCENARIO
    return _run(assignment, scenario, mode)


def _run(assignment, scenario, mode):
    try:
        sched, obj = simulate(assignment, scenario, mode)
    except SimulationStuck:
        return INFEASIBLE, None
    return obj, tuple(sched.completion[a.id] for a in scenario.agvs)


class Evaluator:
    """Simulate chromosomes, memoising results and feeding a Pareto archive.

    Only fresh simulations count against an evaluation budget; a repeat
    request is answered from the cache for free. So that a search stuck on
    known assignments still ends, the budget is also spent once the number of
    requests reaches ``STALL_FACTOR`` times the evaluation budget. Results do
    not depend on ``workers``.
    """

    def __init__(self, scenario: Scenario, priority_mode: str = ENERGY, budget: Budget | None = None, workers: int = 1):
        self.scenario = scenario
        self.mode = priority_mode
        self.budget = budget or Budget(evaluations=200)
        self.workers = max(1, int(workers))
        self.agv_ids = [a.id for a in scenario.agvs]
        self.cache: dict[tuple, tuple[ObjectiveVector, tuple | None]] = {}
        self.count = 0
        self.requests = 0
        self.started = time.monotonic()
        self.archive = ParetoArchive()
        self._pool = None

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def exhausted(self) -> bool:
        b = self.budget
        if b.evaluations is not None and (self.count >= b.evaluations or self.requests >= STALL_FACTOR * b.evaluations):
            return True
        return b.seconds is not None and time.monotonic() - self.started >= b.seconds

    def assignment(self, x: Chromosome) -> Assignment:
        return Assignment.from_sections(self.agv_ids, x.section1, x.section2)

    def evaluate(self, chromosomes) -> list[tuple[Chromosome, ObjectiveVector]]:
        chromosomes = list(chromosomes)
        assignments = [self.assignment(x) for x in chromosomes]
        todo = list(dict.fromkeys(a.key() for a in assignments if a.key() not in self.cache))
        by_key = {a.key(): a for a in assignments}
        if todo:
            if self.workers > 1 and len(todo) > 1:
                if self._pool is None:
                    self._pool = ProcessPoolExecutor(self.workers, initializer=_init_worker, initargs=(self.scenario, self.mode))
                results = list(self._pool.map(_simulate_one, [by_key[k] for k in todo]))
            else:
                results = [_run(by_key[k], self.scenario, self.mode) for k in todo]
            self.cache.update(zip(todo, results))
        out = []
        for x, a in zip(chromosomes, assignments):
            obj, times = self.cache[a.key()]
            scored = x.with_times(times) if times is not None else x
            out.append((scored, obj))
            self.archive.add(scored, obj)
        self.count += len(todo)
        self.requests += len(chromosomes)
        return out


def log_record(iteration: int, archive: ParetoArchive, weights=None) -> dict:
    pts = archive.points()
    rec = {"iter": iteration, "archive_size": len(pts)}
    for k in range(4):
        rec[f"best_G{k + 1}"] = min((p[k] for p in pts), default=None)
    rec["operator_weights"] = weights or {}
    return rec


def dump_log_jsonl(records) -> str:
    return "".join(json.dumps(r, sort_keys=True) + "\n" for r in records)
