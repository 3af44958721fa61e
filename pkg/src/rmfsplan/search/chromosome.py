"""Two-section chromosome and its variation operators.

``section1`` lists every task id once; ``section2`` says how many of them,
read left to right, belong to each AGV (AGVs in id order). Operators never
mutate their input; they return a new chromosome, or the input itself when
the move does not apply.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Chromosome:
    section1: tuple[int, ...]
    section2: tuple[int, ...]
    # per-AGV running times of the last evaluation, used by guided operators
    times: tuple[int, ...] | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "section1", tuple(int(v) for v in self.section1))
        object.__setattr__(self, "section2", tuple(int(v) for v in self.section2))

    @classmethod
    def from_groups(cls, groups) -> Chromosome:
        return cls(tuple(k for g in groups for k in g), tuple(len(g) for g in groups))

    def groups(self) -> list[list[int]]:
        out, i = [], 0
        for n in self.section2:
            out.append(list(self.section1[i : i + n]))
            i += n
        return out

    def with_times(self, times) -> Chromosome:
        return Chromosome(self.section1, self.section2, tuple(int(t) for t in times))

    def running_times(self) -> tuple[float, ...]:
        # before any evaluation, task counts stand in for running time
        return self.times if self.times is not None else self.section2

    def is_valid(self, task_ids, min_count: bool = False) -> bool:
        if sorted(self.section1) != sorted(task_ids):
            return False
        if sum(self.section2) != len(self.section1) or min(self.section2, default=0) < 0:
            return False
        return not (min_count and min(self.section2, default=1) < 1)


def random_chromosome(rng: np.random.Generator, task_ids, n_agvs: int, min_count: bool = True) -> Chromosome:
    """Uniform random permutation plus a uniform random composition of the task count."""
    perm = rng.permutation(np.asarray(sorted(task_ids)))
    n = len(perm)
    if min_count and n >= n_agvs:
        cuts = np.sort(rng.choice(np.arange(1, n), size=n_agvs - 1, replace=False)) if n_agvs > 1 else []
        counts = np.diff(np.concatenate([[0], cuts, [n]]))
    else:
        counts = rng.multinomial(n, [1 / n_agvs] * n_agvs)
    return Chromosome(tuple(perm), tuple(counts))


# -- crossover ---------------------------------------------------------------


def _pmx_child(donor, base, i, j):
    child = list(base)
    child[i:j] = donor[i:j]
    segment = set(donor[i:j])
    where = {v: k for k, v in enumerate(donor)}
    for k in list(range(i)) + list(range(j, len(base))):
        v = base[k]
        while v in segment:
            v = base[where[v]]
        child[k] = v
    return child


def pmx(p1, p2, cut: tuple[int, int]) -> tuple[list[int], list[int]]:
    """Partially matched crossover with the segment ``[i, j)`` exchanged."""
    i, j = cut
    return _pmx_child(p2, p1, i, j), _pmx_child(p1, p2, i, j)


def pmx_crossover(p1: Chromosome, p2: Chromosome, rng: np.random.Generator) -> tuple[list[int], list[int]]:
    n = len(p1.section1)
    if n < 2:
        return list(p1.section1), list(p2.section1)
    i, j = sorted(rng.choice(n + 1, size=2, replace=False))
    return pmx(p1.section1, p2.section1, (int(i), int(j)))


def repair_counts(counts, total: int) -> tuple[int, ...]:
    """Shift single tasks until the counts sum to ``total``.

    Over the total, the AGV holding most tasks gives one up; under it, the
    AGV holding fewest takes one. Ties go to the lowest index.
    """
    c = [int(v) for v in counts]
    while sum(c) > total:
        c[int(np.argmax(c))] -= 1
    while sum(c) < total:
        c[int(np.argmin(c))] += 1
    return tuple(c)


def arc_crossover(p1, p2, alpha: float, total: int) -> tuple[int, ...]:
    """Arithmetic crossover of two count vectors, repaired to sum to ``total``."""
    if len(p1) != len(p2):
        raise ValueError("parents differ in AGV count")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    # the epsilon keeps exact integers from flooring one below after rounding
    raw = [math.floor(alpha * a + (1 - alpha) * b + 1e-9) for a, b in zip(p1, p2)]
    return repair_counts(raw, total)


# -- neighbourhood operators ---------------------------------------------------


def _densest_aisle(tasks, aisles) -> int | None:
    if not tasks:
        return None
    counts = Counter(aisles[k] for k in tasks)
    return min(counts, key=lambda a: (-counts[a], a))


def _pick_pair(x: Chromosome, rng) -> tuple[int, int] | None:
    """Two AGVs holding tasks; the first is the one with the longer running time."""
    active = [a for a, n in enumerate(x.section2) if n > 0]
    if len(active) < 2:
        return None
    i, j = (active[k] for k in rng.choice(len(active), size=2, replace=False))
    t = x.running_times()
    if (t[j], -j) > (t[i], -i):
        i, j = j, i
    return i, j


def guided_swap(x: Chromosome, rng, aisles, min_count: bool = True) -> Chromosome:
    """Pull tasks of the slower AGV's densest aisle towards it.

    A is the slower AGV of a random pair and B the other. A task of B lying
    in A's densest aisle trades places with a task of A lying elsewhere.
    """
    pair = _pick_pair(x, rng)
    if pair is None:
        return x
    a, b = pair
    g = x.groups()
    dense = _densest_aisle(g[a], aisles)
    from_b = [k for k, t in enumerate(g[b]) if aisles[t] == dense]
    from_a = [k for k, t in enumerate(g[a]) if aisles[t] != dense]
    if not from_a or not from_b:
        return x
    ia = from_a[int(rng.integers(len(from_a)))]
    ib = from_b[int(rng.integers(len(from_b)))]
    g[a][ia], g[b][ib] = g[b][ib], g[a][ia]
    return Chromosome.from_groups(g)


def guided_insertion(x: Chromosome, rng, aisles, min_count: bool = True) -> Chromosome:
    """Move a task of the slower AGV into the other AGV's densest aisle group.

    A task of A from B's densest aisle is removed and inserted at a random
    position of B's list.
    """
    pair = _pick_pair(x, rng)
    if pair is None:
        return x
    a, b = pair
    g = x.groups()
    if len(g[a]) < (2 if min_count else 1):
        return x
    dense = _densest_aisle(g[b], aisles)
    movable = [k for k, t in enumerate(g[a]) if aisles[t] == dense]
    if not movable:
        return x
    task = g[a].pop(movable[int(rng.integers(len(movable)))])
    g[b].insert(int(rng.integers(len(g[b]) + 1)), task)
    return Chromosome.from_groups(g)


def arrange(tasks, aisles, order=None) -> list[int]:
    """Stable grouping of ``tasks`` by aisle; groups in first-occurrence order unless ``order`` is given."""
    seen = list(dict.fromkeys(aisles[t] for t in tasks))
    if order is not None:
        seen = [seen[i] for i in order]
    return [t for a in seen for t in tasks if aisles[t] == a]


def arrangement(x: Chromosome, agv: int, rng=None, aisles=None) -> Chromosome:
    g = x.groups()
    g[agv] = arrange(g[agv], aisles)
    out = Chromosome.from_groups(g)
    return x if out == x else out


def guided_arrangement(x: Chromosome, rng, aisles, min_count: bool = True) -> Chromosome:
    """Arrange the slowest AGV whose tasks are not yet grouped by aisle."""
    g = x.groups()
    t = x.running_times()
    for a in sorted(range(len(g)), key=lambda a: (-t[a], a)):
        if len(g[a]) >= 2 and arrange(g[a], aisles) != g[a]:
            return arrangement(x, a, aisles=aisles)
    return x


def random_swap(x: Chromosome, rng, aisles=None, min_count: bool = True) -> Chromosome:
    active = [a for a, n in enumerate(x.section2) if n > 0]
    if len(active) < 2:
        return x
    a, b = (active[k] for k in rng.choice(len(active), size=2, replace=False))
    g = x.groups()
    ia, ib = int(rng.integers(len(g[a]))), int(rng.integers(len(g[b])))
    g[a][ia], g[b][ib] = g[b][ib], g[a][ia]
    return Chromosome.from_groups(g)


def random_insertion(x: Chromosome, rng, aisles=None, min_count: bool = True) -> Chromosome:
    donors = [a for a, n in enumerate(x.section2) if n >= (2 if min_count else 1)]
    if not donors or len(x.section2) < 2:
        return x
    a = donors[int(rng.integers(len(donors)))]
    others = [b for b in range(len(x.section2)) if b != a]
    b = others[int(rng.integers(len(others)))]
    g = x.groups()
    task = g[a].pop(int(rng.integers(len(g[a]))))
    g[b].insert(int(rng.integers(len(g[b]) + 1)), task)
    return Chromosome.from_groups(g)


def random_arrangement(x: Chromosome, rng, aisles, min_count: bool = True) -> Chromosome:
    g = x.groups()
    cands = [a for a in range(len(g)) if len(g[a]) >= 2]
    if not cands:
        return x
    a = cands[int(rng.integers(len(cands)))]
    n_groups = len(set(aisles[t] for t in g[a]))
    if n_groups < 2:
        return x
    g[a] = arrange(g[a], aisles, order=[int(i) for i in rng.permutation(n_groups)])
    out = Chromosome.from_groups(g)
    return x if out == x else out


RANDOM_OPERATORS = {
    "random_swap": random_swap,
    "random_insertion": random_insertion,
    "random_arrangement": random_arrangement,
}
GUIDED_OPERATORS = {
    "guided_swap": guided_swap,
    "guided_insertion": guided_insertion,
    "guided_arrangement": guided_arrangement,
}
ALL_OPERATORS = {**RANDOM_OPERATORS, **GUIDED_OPERATORS}
