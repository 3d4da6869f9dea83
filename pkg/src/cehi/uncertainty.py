"""Domination probability of objective vectors and the derived uncertainty measures."""

from __future__ import annotations

import warnings

import numpy as np

from . import pareto
from .ensemble import FrontEnsemble

LINE_EPSILON = 1e-4
VOLUME_EPSILON = 1e-3


class DegenerateLineWarning(RuntimeWarning):
    """Raised as a warning when the Ideal-Nadir segment has zero length."""


class DominationField:
    """Empirical domination probability ``p(y)`` over an ensemble of simulated fronts.

    ``p(y)`` is the fraction of fronts holding a point that weakly dominates ``y``.
    Scalar lookups are cached.
    """

    def __init__(self, ensemble: FrontEnsemble | list):
        fronts = ensemble.fronts if isinstance(ensemble, FrontEnsemble) else list(ensemble)
        if not fronts:
            raise ValueError("empty ensemble")
        self.fronts = [np.atleast_2d(np.asarray(f, float)) for f in fronts]
        self.cache: dict[tuple, float] = {}

    @property
    def n_sim(self) -> int:
        return len(self.fronts)

    def __call__(self, Y) -> np.ndarray:
        Y = np.atleast_2d(np.asarray(Y, float))
        count = np.zeros(Y.shape[0])
        for front in self.fronts:
            count += pareto.dominated_mask(front, Y)
        return count / self.n_sim

    def at(self, y) -> float:
        key = tuple(np.asarray(y, float).ravel())
        if key not in self.cache:
            self.cache[key] = float(self(np.asarray(key)[None, :])[0])
        return self.cache[key]


def p_hat(field: DominationField, y) -> float:
    return field.at(y)


def line_points(line, n_points: int = 100) -> np.ndarray:
    start, end = (np.asarray(p, float) for p in line)
    t = np.linspace(0.0, 1.0, n_points)[:, None]
    return start + t * (end - start)


def line_uncertainty(field: DominationField, line, n_points: int = 100) -> float:
    """Average of ``p (1 - p)`` over ``n_points`` evenly spaced points, endpoints included."""
    start, end = (np.asarray(p, float) for p in line)
    if np.linalg.norm(end - start) <= pareto.LINE_TOL:
        warnings.warn("degenerate Ideal-Nadir segment, uncertainty set to 0", DegenerateLineWarning)
        return 0.0
    p = field(line_points((start, end), n_points))
    return float(np.mean(p * (1.0 - p)))


def volume_uncertainty(field: DominationField, ideal_hat, ref, mc_samples: int = 100_000, seed=0,
                       return_stderr: bool = False):
    """Average of ``p (1 - p)`` over uniform draws in the box ``[ideal_hat, ref]``."""
    lo = np.asarray(ideal_hat, float)
    hi = np.asarray(ref, float)
    if not np.all(hi > lo):
        raise ValueError("the box [ideal, ref] is empty")
    rng = np.random.default_rng(seed)
    Y = lo + rng.random((int(mc_samples), lo.size)) * (hi - lo)
    p = field(Y)
    v = p * (1.0 - p)
    val = float(v.mean())
    if return_stderr:
        return val, float(v.std(ddof=1) / np.sqrt(len(v)))
    return val


def converged(field: DominationField, line, epsilon: float = LINE_EPSILON, n_points: int = 100) -> bool:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateLineWarning)
        return line_uncertainty(field, line, n_points) < epsilon
