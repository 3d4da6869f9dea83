"""Pareto dominance, front summaries (Ideal, Nadir, extreme points, center) and front metrics.

All objectives are minimized. Points are passed as ``(n, m)`` arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

LINE_TOL = 1e-12


def _as_points(points) -> np.ndarray:
    P = np.asarray(points, dtype=float)
    if P.size == 0:
        return P.reshape(0, P.shape[-1] if P.ndim == 2 else 0)
    return np.atleast_2d(P)


def dominates(a, b) -> bool:
    """Pareto dominance: ``a`` no worse everywhere and strictly better somewhere."""
    a = np.asarray(a)
    b = np.asarray(b)
    return bool(np.all(a <= b) and np.any(a < b))


def weakly_dominates(a, b) -> bool:
    return bool(np.all(np.asarray(a) <= np.asarray(b)))


def non_dominated(points) -> np.ndarray:
    """Indices (ascending) of the non-dominated points.

    Exact duplicates keep only their first occurrence.
    """
    P = _as_points(points)
    n = P.shape[0]
    if n == 0:
        return np.zeros(0, dtype=int)
    m = P.shape[1]
    # lexsort is stable, so among duplicates the lowest original index comes first;
    # a point can only be dominated by points preceding it in this order.
    order = np.lexsort(P.T[::-1])
    if m == 1:
        return np.array([order[0]])
    if m == 2:
        f2 = P[order, 1]
        best = np.minimum.accumulate(f2)
        keep = np.ones(n, dtype=bool)
        keep[1:] = f2[1:] < best[:-1]
        return np.sort(order[keep])
    kept = []
    front = np.empty((0, m))
    for i in order:
        p = P[i]
        if front.shape[0] and np.any(np.all(front <= p, axis=1)):
            continue
        kept.append(i)
        front = np.vstack([front, p])
    return np.sort(np.asarray(kept))


def pareto_front(points) -> np.ndarray:
    P = _as_points(points)
    return P[non_dominated(P)]


def dominated_mask(front, Y) -> np.ndarray:
    """For each row ``y`` of ``Y``, whether some point of ``front`` weakly dominates it."""
    F = _as_points(front)
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if F.shape[0] == 0:
        return np.zeros(Y.shape[0], dtype=bool)
    if F.shape[1] == 2:
        F = F[np.argsort(F[:, 0], kind="stable")]
        best = np.minimum.accumulate(F[:, 1])
        pos = np.searchsorted(F[:, 0], Y[:, 0], side="right") - 1
        out = np.zeros(Y.shape[0], dtype=bool)
        ok = pos >= 0
        out[ok] = best[pos[ok]] <= Y[ok, 1]
        return out
    out = np.zeros(Y.shape[0], dtype=bool)
    chunk = max(1, 2_000_000 // max(F.shape[0] * F.shape[1], 1))
    for start in range(0, Y.shape[0], chunk):
        block = Y[start:start + chunk]
        out[start:start + chunk] = np.any(np.all(F[None, :, :] <= block[:, None, :], axis=2), axis=1)
    return out


def squared_line_distances(points, start, end) -> np.ndarray:
    """Squared Euclidean distances of ``points`` to the infinite line through ``start`` and ``end``."""
    P = _as_points(points)
    start = np.asarray(start, dtype=float)
    direction = np.asarray(end, dtype=float) - start
    length = np.linalg.norm(direction)
    v = P - start
    if length <= LINE_TOL:
        return np.einsum("ij,ij->i", v, v)
    u = direction / length
    along = v @ u
    return np.maximum(np.einsum("ij,ij->i", v, v) - along * along, 0.0)


def project_closest(points, start, end):
    """Project the point closest to the ``start``-``end`` line onto the segment.

    Returns ``(center, t, index)`` with ``center = start + t * (end - start)`` and
    ``t`` clamped to [0, 1]. A degenerate segment returns the first point.
    """
    P = _as_points(points)
    start = np.asarray(start, dtype=float)
    direction = np.asarray(end, dtype=float) - start
    length2 = float(direction @ direction)
    if length2 <= LINE_TOL ** 2:
        return P[0].copy(), 0.0, 0
    d2 = squared_line_distances(P, start, start + direction)
    idx = int(np.argmin(d2))
    if d2[idx] <= LINE_TOL:
        t = float(np.clip((P[idx] - start) @ direction / length2, 0.0, 1.0))
        return P[idx].copy(), t, idx
    t = float(np.clip((P[idx] - start) @ direction / length2, 0.0, 1.0))
    return start + t * direction, t, idx


@dataclass(frozen=True)
class FrontSummary:
    front: np.ndarray
    front_indices: np.ndarray
    ideal: np.ndarray
    nadir: np.ndarray
    extreme_points: np.ndarray
    center: np.ndarray
    center_t: float
    closest_index: int

    @property
    def line(self) -> tuple[np.ndarray, np.ndarray]:
        return self.ideal, self.nadir


def extreme_points(front, nadir=None) -> np.ndarray:
    """Row ``j`` is the front point attaining the largest ``j``-th objective (ties: smallest norm)."""
    F = _as_points(front)
    if nadir is None:
        nadir = F.max(axis=0)
    norms = np.linalg.norm(F, axis=1)
    out = np.empty((F.shape[1], F.shape[1]))
    for j in range(F.shape[1]):
        candidates = np.flatnonzero(F[:, j] == nadir[j])
        out[j] = F[candidates[np.argmin(norms[candidates])]]
    return out


def summarize(points) -> FrontSummary:
    P = _as_points(points)
    if P.shape[0] == 0:
        raise ValueError("summarize needs at least one point")
    idx = non_dominated(P)
    F = P[idx]
    ideal = F.min(axis=0)
    nadir = F.max(axis=0)
    center, t, closest = project_closest(F, ideal, nadir)
    return FrontSummary(
        front=F,
        front_indices=idx,
        ideal=ideal,
        nadir=nadir,
        extreme_points=extreme_points(F, nadir),
        center=center,
        center_t=t,
        closest_index=closest,
    )


# --------------------------------------------------------------------------- hypervolume


def _hv2d(F, ref):
    F = F[np.all(F < ref, axis=1)]
    if F.shape[0] == 0:
        return 0.0
    F = F[np.lexsort((F[:, 1], F[:, 0]))]
    F = F[np.concatenate([[True], F[1:, 1] < np.minimum.accumulate(F[:, 1])[:-1]])]
    widths = np.append(F[1:, 0], ref[0]) - F[:, 0]
    return float(np.sum(widths * (ref[1] - F[:, 1])))


def _hv3d(F, ref):
    F = F[np.all(F < ref, axis=1)]
    if F.shape[0] == 0:
        return 0.0
    F = F[np.argsort(F[:, 2], kind="stable")]
    z = np.append(F[1:, 2], ref[2])
    total = 0.0
    for i in range(F.shape[0]):
        depth = z[i] - F[i, 2]
        if depth > 0:
            total += depth * _hv2d(F[: i + 1, :2], ref[:2])
    return total


def hypervolume_mc(front, ref, n_samples: int = 100_000, seed=0) -> tuple[float, float]:
    """Monte-Carlo estimate of the hypervolume and its standard error."""
    F = _as_points(front)
    ref = np.asarray(ref, dtype=float)
    if F.shape[0] == 0:
        return 0.0, 0.0
    F = F[np.all(F < ref, axis=1)]
    if F.shape[0] == 0:
        return 0.0, 0.0
    lower = F.min(axis=0)
    box = float(np.prod(ref - lower))
    rng = np.random.default_rng(seed)
    U = lower + rng.random((n_samples, F.shape[1])) * (ref - lower)
    hit = dominated_mask(F, U).astype(float)
    p = hit.mean()
    return box * p, box * np.sqrt(p * (1 - p) / n_samples)


def hypervolume(front, ref, *, mc_samples: int = 100_000, seed=0) -> float:
    """Volume dominated by ``front`` and bounded by ``ref``.

    Exact for two and three objectives, Monte-Carlo beyond.
    """
    F = _as_points(front)
    ref = np.asarray(ref, dtype=float)
    if F.shape[0] == 0:
        return 0.0
    m = F.shape[1]
    if m < 2:
        raise ValueError("hypervolume needs at least two objectives")
    if m == 2:
        return _hv2d(F, ref)
    if m == 3:
        return _hv3d(F, ref)
    return hypervolume_mc(F, ref, mc_samples, seed)[0]


def _box_strips(front, ref):
    """Strip decomposition of the 2D region below ``ref`` not dominated by ``front``.

    Returns arrays ``(lower, upper, height)``: in strip ``i`` a point ``z`` with
    ``lower[i] <= z1 < upper[i]`` is non-dominated iff ``z2 < height[i]``.
    """
    F = _as_points(front)
    ref = np.asarray(ref, dtype=float)
    if F.shape[0]:
        F = F[np.all(F <= ref, axis=1)]
    if F.shape[0]:
        F = F[non_dominated(F)]
        F = F[np.argsort(F[:, 0])]
    lower = np.concatenate([[-np.inf], F[:, 0]])
    upper = np.concatenate([F[:, 0], [ref[0]]])
    height = np.concatenate([[ref[1]], F[:, 1]])
    return lower, upper, height


def hv_improvements(front, Y, ref) -> np.ndarray:
    """Hypervolume improvement of each row of ``Y`` over ``front`` (vectorized)."""
    F = _as_points(front)
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    ref = np.asarray(ref, dtype=float)
    m = Y.shape[1]
    gap = np.clip(ref - Y, 0.0, None)
    if F.shape[0]:
        F = F[np.all(F <= ref, axis=1)]
    if F.shape[0] == 0:
        return np.prod(gap, axis=1)
    if m == 2:
        lower, upper, height = _box_strips(F, ref)
        widths = np.clip(upper[None, :] - np.maximum(Y[:, :1], lower[None, :]), 0.0, None)
        heights = np.clip(height[None, :] - Y[:, 1:2], 0.0, None)
        return np.sum(widths * heights, axis=1)
    out = np.zeros(Y.shape[0])
    active = np.all(Y < ref, axis=1) & ~dominated_mask(F, Y)
    for i in np.flatnonzero(active):
        y = Y[i]
        clipped = np.maximum(F, y)
        out[i] = np.prod(ref - y) - hypervolume(clipped, ref)
    return np.maximum(out, 0.0)


def hv_improvement(front, y, ref) -> float:
    return float(hv_improvements(front, np.atleast_2d(y), ref)[0])


# --------------------------------------------------------------------------- metrics


def igd(approx, reference_front) -> float:
    """Mean distance from each reference point to its nearest approximation point."""
    A = _as_points(approx)
    R = _as_points(reference_front)
    if A.shape[0] == 0 or R.shape[0] == 0:
        raise ValueError("igd needs non-empty sets")
    return float(cdist(R, A).min(axis=1).mean())


def epsilon_indicator(approx, reference_front) -> float:
    """Smallest uniform shift making one approximation point non-dominated by the reference.

    ``y - eps`` is dominated by ``z`` as long as ``eps <= min_j (y_j - z_j)``, so the
    indicator is ``min_y max(0, max_z min_j (y_j - z_j))``.
    """
    A = _as_points(approx)
    R = _as_points(reference_front)
    if A.shape[0] == 0 or R.shape[0] == 0:
        raise ValueError("epsilon_indicator needs non-empty sets")
    margins = np.min(A[:, None, :] - R[None, :, :], axis=2)
    return float(max(0.0, np.min(np.max(margins, axis=1))))


def restricted_region(center, nadir, w: float) -> np.ndarray:
    """Corner of the central improvement region, ``(1 - w) * center + w * nadir``."""
    if not 0.0 <= w <= 1.0:
        raise ValueError("w must lie in [0, 1]")
    return (1.0 - w) * np.asarray(center, dtype=float) + w * np.asarray(nadir, dtype=float)


def restrict(points, corner) -> np.ndarray:
    """Points weakly dominating ``corner``."""
    P = _as_points(points)
    if P.shape[0] == 0:
        return P
    return P[np.all(P <= np.asarray(corner), axis=1)]


def normalize(points, ideal, nadir) -> np.ndarray:
    ideal = np.asarray(ideal, dtype=float)
    span = np.asarray(nadir, dtype=float) - ideal
    span = np.where(span > 0, span, 1.0)
    return (np.asarray(points, dtype=float) - ideal) / span
