"""Front quality indicators: hypervolume and covered size of space (CSS).

Objectives are minimised; a larger hypervolume is better.
"""

from __future__ import annotations

import numpy as np

from .search.pareto import dominates, weakly_dominates


class PointBeyondReference(ValueError):
    pass


class EmptyY(ValueError):
    pass


def _as_array(front) -> np.ndarray:
    pts = [tuple(p.as_tuple()) if hasattr(p, "as_tuple") else tuple(p) for p in front]
    return np.array(pts, dtype=float).reshape(len(pts), -1) if pts else np.zeros((0, 0))


def _nondominated(pts: np.ndarray) -> np.ndarray:
    keep = []
    for i, p in enumerate(pts):
        if any(dominates(q, p) for q in pts) or any(np.array_equal(p, pts[k]) for k in keep):
            continue
        keep.append(i)
    return pts[keep]


def _hv2(pts: np.ndarray, ref: np.ndarray) -> float:
    pts = pts[np.argsort(pts[:, 0], kind="stable")]
    vol, best_y = 0.0, ref[1]
    for x, y in pts:
        if y < best_y:
            vol += (ref[0] - x) * (best_y - y)
            best_y = y
    return vol


def _wfg(pts: np.ndarray, ref: np.ndarray) -> float:
    if len(pts) == 0:
        return 0.0
    if len(pts) == 1:
        return float(np.prod(ref - pts[0]))
    if pts.shape[1] == 2:
        return _hv2(pts, ref)
    # Sort on the last objective so later points limit earlier ones tightly.
    pts = pts[np.argsort(pts[:, -1], kind="stable")[::-1]]
    total = 0.0
    for i, p in enumerate(pts):
        rest = pts[i + 1 :]
        box = float(np.prod(ref - p))
        if len(rest):
            limited = _nondominated(np.maximum(rest, p))
            box -= _wfg(limited, ref)
        total += box
    return total


def hypervolume(front, ref) -> float:
    """Exact volume dominated by ``front`` and bounded by ``ref``.

    Uses exclusive-volume decomposition: the volume of a set is the sum over
    its points of the box each adds beyond the points after it.
    """
    pts = _as_array(front)
    ref = np.asarray(ref, dtype=float)
    if len(pts) == 0:
        return 0.0
    if np.any(pts > ref):
        raise PointBeyondReference("every point must be <= the reference point")
    return _wfg(_nondominated(pts), ref)


def reference_point(fronts, factor: float = 1.1) -> np.ndarray:
    """Componentwise maximum over all fronts, scaled by ``factor``."""
    pts = np.vstack([_as_array(f) for f in fronts if len(f)])
    return pts.max(axis=0) * factor


def ideal_point(fronts) -> np.ndarray:
    return np.vstack([_as_array(f) for f in fronts if len(f)]).min(axis=0)


def normalized_hypervolume(front, ref, ideal) -> float:
    """Hypervolume divided by the volume of the box between ``ideal`` and ``ref``."""
    span = np.asarray(ref, float) - np.asarray(ideal, float)
    denom = float(np.prod(span))
    return hypervolume(front, ref) / denom if denom > 0 else 0.0


def css(X, Y) -> float:
    """Share of ``Y`` weakly dominated by at least one point of ``X``."""
    ys = _as_array(Y)
    if len(ys) == 0:
        raise EmptyY("Y must not be empty")
    xs = _as_array(X)
    covered = sum(any(weakly_dominates(x, y) for x in xs) for y in ys)
    return covered / len(ys)


def monte_carlo_hypervolume(front, ref, rng: np.random.Generator, samples: int = 100_000) -> tuple[float, float]:
    """Sampling estimate of the hypervolume and its standard error."""
    pts = _as_array(front)
    ref = np.asarray(ref, dtype=float)
    lo = pts.min(axis=0)
    box = float(np.prod(ref - lo))
    u = lo + rng.random((samples, len(ref))) * (ref - lo)
    hit = np.zeros(samples, dtype=bool)
    for p in pts:
        hit |= np.all(u >= p, axis=1)
    frac = hit.mean()
    return box * frac, box * np.sqrt(frac * (1 - frac) / samples)
