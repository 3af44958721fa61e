"""Pareto dominance, non-dominated sorting, crowding distance and archives.

All objectives are minimised.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def _vec(v) -> tuple[float, ...]:
    return tuple(v.as_tuple()) if hasattr(v, "as_tuple") else tuple(v)


def dominates(a, b) -> bool:
    """``a`` is no worse than ``b`` everywhere and strictly better somewhere."""
    a, b = _vec(a), _vec(b)
    return all(x <= y for x, y in zip(a, b)) and any(x < y for x, y in zip(a, b))


def weakly_dominates(a, b) -> bool:
    return all(x <= y for x, y in zip(_vec(a), _vec(b)))


def non_dominated_sort(pop) -> list[list[int]]:
    """Fast non-dominated sort; fronts list indices in ascending order."""
    pts = [_vec(p) for p in pop]
    n = len(pts)
    dominated_by = [[] for _ in range(n)]
    count = [0] * n
    for i in range(n):
        for j in range(i + 1, n):
            if dominates(pts[i], pts[j]):
                dominated_by[i].append(j)
                count[j] += 1
            elif dominates(pts[j], pts[i]):
                dominated_by[j].append(i)
                count[i] += 1
    fronts = []
    current = [i for i in range(n) if count[i] == 0]
    while current:
        fronts.append(sorted(current))
        nxt = []
        for i in current:
            for j in dominated_by[i]:
                count[j] -= 1
                if count[j] == 0:
                    nxt.append(j)
        current = nxt
    return fronts


def crowding_distance(front) -> np.ndarray:
    """Sum over objectives of the normalised gap between each point's neighbours.

    Boundary points of every objective get infinity, as does every point of a
    front with at most two members. Objectives with zero range add nothing.
    """
    pts = np.array([_vec(p) for p in front], dtype=float)
    n = len(pts)
    if n <= 2:
        return np.full(n, np.inf)
    dist = np.zeros(n)
    for k in range(pts.shape[1]):
        order = np.argsort(pts[:, k], kind="stable")
        col = pts[order, k]
        span = col[-1] - col[0]
        dist[order[0]] = dist[order[-1]] = np.inf
        if span == 0:
            continue
        dist[order[1:-1]] += (col[2:] - col[:-2]) / span
    return dist


@dataclass
class ParetoArchive:
    """Mutually non-dominated ``(solution, objectives)`` pairs.

    A candidate whose objective vector equals an archived one is dropped, so
    each point of the front is represented once, by the first solution that
    reached it.
    """

    entries: list[tuple[object, object]] = field(default_factory=list)

    def add(self, solution, objectives) -> bool:
        v = _vec(objectives)
        if not np.all(np.isfinite(v)):
            return False
        for _, o in self.entries:
            ov = _vec(o)
            if ov == v or dominates(ov, v):
                return False
        self.entries = [(s, o) for s, o in self.entries if not dominates(v, _vec(o))]
        self.entries.append((solution, objectives))
        return True

    def extend(self, pairs) -> None:
        for s, o in pairs:
            self.add(s, o)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def points(self) -> list[tuple[float, ...]]:
        return [_vec(o) for _, o in self.entries]

    def sorted_entries(self):
        return sorted(self.entries, key=lambda e: _vec(e[1]))

    def is_consistent(self) -> bool:
        pts = self.points()
        return not any(dominates(p, q) for p in pts for q in pts)
