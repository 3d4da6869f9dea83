"""Benchmark problems with analytically known fronts and centers."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from . import pareto

GOLDEN_CENTER = (3.0 - np.sqrt(5.0)) / 2.0


@dataclass(frozen=True)
class Problem:
    id: str
    d: int
    m: int
    evaluate: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    true_front: np.ndarray | None = field(default=None, repr=False)
    true_center: np.ndarray | None = None

    def __call__(self, x) -> np.ndarray:
        return np.asarray(self.evaluate(np.asarray(x, float)), float)

    @property
    def ideal(self) -> np.ndarray | None:
        return None if self.true_front is None else self.true_front.min(axis=0)

    @property
    def nadir(self) -> np.ndarray | None:
        return None if self.true_front is None else self.true_front.max(axis=0)


def zdt1(d: int = 4, n_front: int = 1000) -> Problem:
    if d < 2:
        raise ValueError("zdt1 needs d >= 2")

    def evaluate(x):
        g = 1.0 + 9.0 * np.sum(x[1:]) / (d - 1)
        return np.array([x[0], g * (1.0 - np.sqrt(x[0] / g))])

    f1 = np.linspace(0.0, 1.0, n_front)
    front = np.column_stack([f1, 1.0 - np.sqrt(f1)])
    return Problem("zdt1", d, 2, evaluate, front, np.full(2, GOLDEN_CENTER))


_GAP = (np.deg2rad(27.0), np.deg2rad(54.0))


def _gap_angle(u):
    """Map [0, 1] onto [0, 27deg] U [54deg, 90deg], proportionally to arc length."""
    a, b = _GAP
    total = a + (np.pi / 2 - b)
    theta = u * total
    return np.where(theta <= a, theta, theta - a + b)


def _convoluted_f2(t):
    return 1.0 - t - 0.4 * np.sin(3 * np.pi * t) / (3 * np.pi)


def synthetic_front_problem(kind: str, n_front: int = 2000) -> Problem:
    """Two-design, two-objective problems whose fronts are linear, concave, split or wavy.

    The first design variable moves along the front and the second pushes away
    from it, so the front is reached at ``x2 = 0``.
    """
    u = np.linspace(0.0, 1.0, n_front)
    if kind == "linear":
        def evaluate(x):
            return np.array([x[0], 1.0 - x[0] + x[1]])
        front = np.column_stack([u, 1.0 - u])
        center = np.array([0.5, 0.5])
    elif kind == "concave_arc":
        def evaluate(x):
            th = x[0] * np.pi / 2
            return (1.0 + x[1]) * np.array([np.cos(th), np.sin(th)])
        th = u * np.pi / 2
        front = np.column_stack([np.cos(th), np.sin(th)])
        center = np.full(2, np.sqrt(0.5))
    elif kind == "discontinuous":
        def evaluate(x):
            th = _gap_angle(x[0])
            return (1.0 + x[1]) * np.array([np.cos(th), np.sin(th)])
        th = _gap_angle(u)
        front = np.column_stack([np.cos(th), np.sin(th)])
        b = _GAP[1]
        center = np.full(2, (np.cos(b) + np.sin(b)) / 2)
    elif kind == "convoluted":
        def evaluate(x):
            return np.array([x[0], _convoluted_f2(x[0]) + x[1]])
        front = np.column_stack([u, _convoluted_f2(u)])
        t = brentq(lambda s: s - _convoluted_f2(s), 0.0, 1.0, xtol=1e-14)
        center = np.array([t, t])
    else:
        raise ValueError(f"unknown synthetic front kind {kind!r}")
    return Problem(kind, 2, 2, evaluate, pareto.pareto_front(front), center)


_REGISTRY: dict[str, Callable[[], Problem]] = {
    "zdt1": lambda: zdt1(4),
    "linear": lambda: synthetic_front_problem("linear"),
    "concave_arc": lambda: synthetic_front_problem("concave_arc"),
    "discontinuous": lambda: synthetic_front_problem("discontinuous"),
    "convoluted": lambda: synthetic_front_problem("convoluted"),
}


def register_problem(name: str, factory: Callable[[], Problem]) -> None:
    _REGISTRY[name] = factory


def get_problem(name: str, d: int | None = None) -> Problem:
    """Look up a problem; ``zdt1`` accepts a dimension, optionally written ``zdt1:6``."""
    base, _, suffix = name.partition(":")
    if suffix:
        d = int(suffix)
    if base == "zdt1":
        return zdt1(d or 4)
    if base not in _REGISTRY:
        raise KeyError(f"unknown problem {name!r}; known: {sorted(_REGISTRY)}")
    return _REGISTRY[base]()


def problem_names() -> list[str]:
    return sorted(_REGISTRY)
