"""The two-phase optimization loop targeting the center of the Pareto front.

Phase one repeatedly estimates the Ideal, Nadir and center from simulated fronts
and samples where the product of expected improvements below the center is
largest, until the domination uncertainty along the Ideal-Nadir line is small.
Phase two fixes a reference point wide enough to be resolved with the remaining
budget and spends that budget on expected hypervolume improvement.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, fields, replace
from typing import Callable

import numpy as np
from scipy.spatial.distance import pdist
from scipy.stats import qmc

from . import gp, pareto
from .acquisition import AcquisitionSpec, maximize
from .ensemble import CenterEstimate, EstimationConfig, estimate_center, nd_ensemble
from .planner import PlannerConfig, RefSelection, select_ref
from .uncertainty import DominationField, line_points

PHASE_INIT, PHASE_ONE, PHASE_TWO = "init", "one", "two"


@dataclass(frozen=True)
class RunConfig:
    """Settings of one optimization run. ``variant`` is ``center``, ``preference`` or ``ehi``."""

    problem: str = "zdt1"
    d: int = 4
    m: int = 2
    budget: int = 60
    n_init: int = 20
    epsilon1: float = 1e-4
    epsilon2: float = 1e-3
    n_sim: int = 200
    s: int = 1000
    C: int = 10
    seed: int = 0
    variant: str = "center"
    target: tuple | None = None
    baseline_ref: str = "r1.1"
    kernel: str = "matern52"
    pool_size: int = 2 ** 14
    n_line: int = 100
    volume_samples: int = 100_000
    acq_candidates: int = 2000
    acq_refine: int = 5
    rollout_candidates: int = 500
    mc_samples: int = 10_000
    lhs_tries: int = 50
    final_estimate: bool = True
    record_timing: bool = False

    def __post_init__(self):
        if not self.n_init <= self.budget:
            raise ValueError("n_init must not exceed the budget")
        if self.n_init < 2:
            raise ValueError("n_init must be at least 2")
        if not (self.epsilon1 > 0 and self.epsilon2 > 0):
            raise ValueError("epsilons must be positive")
        if self.variant not in ("center", "preference", "ehi"):
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.variant == "preference":
            if self.target is None or not np.all(np.isfinite(self.target)):
                raise ValueError("the preference variant needs a finite target")
        if self.baseline_ref not in ("r1.1", "nadir+1"):
            raise ValueError("baseline_ref must be 'r1.1' or 'nadir+1'")

    @property
    def estimation(self) -> EstimationConfig:
        return EstimationConfig(self.pool_size, self.s, self.n_sim)

    @property
    def planner(self) -> PlannerConfig:
        return PlannerConfig(self.C, self.epsilon2, self.rollout_candidates, 0, self.mc_samples,
                             self.volume_samples, self.estimation)

    def as_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self)}
        if out["target"] is not None:
            out["target"] = [float(v) for v in out["target"]]
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown configuration keys: {sorted(unknown)}")
        data = dict(data)
        if data.get("target") is not None:
            data["target"] = tuple(float(v) for v in data["target"])
        return cls(**data)


@dataclass
class IterationRecord:
    t: int
    design: np.ndarray
    objectives: np.ndarray
    phase: str
    target: np.ndarray | None = None
    line_uncertainty: float = float("nan")
    acquisition_value: float = float("nan")
    wall_time: float = float("nan")


@dataclass
class RunState:
    config: RunConfig
    X: np.ndarray
    Y: np.ndarray
    models: list = field(repr=False)
    t: int = 0
    phase: str = PHASE_ONE
    current_center: CenterEstimate | None = field(default=None, repr=False)
    ref_star: np.ndarray | None = None
    selection: RefSelection | None = field(default=None, repr=False)
    log: list = field(default_factory=list)
    aborted: str | None = None
    final_center: CenterEstimate | None = field(default=None, repr=False)

    @property
    def front(self) -> np.ndarray:
        return pareto.pareto_front(self.Y)


class ObjectiveError(RuntimeError):
    pass


# --------------------------------------------------------------------------- helpers


def maximin_lhs(n: int, d: int, seed=0, tries: int = 50) -> np.ndarray:
    """Best of ``tries`` Latin hypercube samples by minimum pairwise distance."""
    rng = np.random.default_rng(seed)
    best, best_score = None, -np.inf
    for _ in range(max(tries, 1)):
        cand = qmc.LatinHypercube(d, seed=rng).random(n)
        score = pdist(cand).min() if n > 1 else 0.0
        if score > best_score:
            best, best_score = cand, score
    return best


def fit_models(X, Y, kernel: str, previous=None, seed=0) -> list:
    out = []
    for j in range(Y.shape[1]):
        warm = None if previous is None else previous[j].kernel.lengthscales
        out.append(gp.fit(X, Y[:, j], kernel, seed=seed, warm_start=warm))
    return out


def repair_target(target, ideal, nadir, front, step: float = 1e-3) -> np.ndarray:
    """Slide a dominated target toward the Ideal until no observation dominates it.

    Steps have length ``step * |N - I|``. Returns the Ideal if every step stays
    dominated.
    """
    target = np.asarray(target, float)
    if not pareto.dominated_mask(front, target[None, :])[0]:
        return target
    ideal = np.asarray(ideal, float)
    span = np.linalg.norm(np.asarray(nadir, float) - ideal)
    gap = np.linalg.norm(target - ideal)
    if gap <= pareto.LINE_TOL or span <= pareto.LINE_TOL:
        return ideal.copy()
    n_steps = int(np.ceil(gap / (step * span)))
    frac = np.clip(np.arange(1, n_steps + 1) * step * span / gap, 0.0, 1.0)
    trail = target + frac[:, None] * (ideal - target)
    free = np.flatnonzero(~pareto.dominated_mask(front, trail))
    return trail[free[0]] if free.size else ideal.copy()


def _segment_projection(P, a, b):
    ab = b - a
    denom = float(ab @ ab)
    if denom <= pareto.LINE_TOL ** 2:
        return np.repeat(a[None, :], len(P), axis=0)
    t = np.clip((P - a) @ ab / denom, 0.0, 1.0)
    return a + t[:, None] * ab


def polyline_target(front, ideal, ref, nadir, n_discrete: int | None = None) -> np.ndarray:
    """Point of the polyline Ideal -> ref -> Nadir closest to the front.

    The front point nearest to the polyline is projected on it. With
    ``n_discrete`` the polyline is replaced by that many points per segment.
    """
    F = np.atleast_2d(np.asarray(front, float))
    vertices = [np.asarray(v, float) for v in (ideal, ref, nadir)]
    if n_discrete:
        t = np.linspace(0.0, 1.0, n_discrete)[:, None]
        grid = np.vstack([a + t * (b - a) for a, b in zip(vertices[:-1], vertices[1:])])
        dist = np.linalg.norm(F[:, None, :] - grid[None, :, :], axis=2)
        i, k = np.unravel_index(np.argmin(dist), dist.shape)
        return grid[k].copy()
    best, best_d = None, np.inf
    for a, b in zip(vertices[:-1], vertices[1:]):
        proj = _segment_projection(F, a, b)
        dist = np.linalg.norm(F - proj, axis=1)
        i = int(np.argmin(dist))
        if dist[i] < best_d:
            best, best_d = proj[i], dist[i]
    return best.copy()


def polyline_points(vertices, n_points: int = 100) -> np.ndarray:
    """``n_points`` points spread by arc length along a polyline, ends included."""
    V = np.asarray(vertices, float)
    seg = np.linalg.norm(np.diff(V, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    if cum[-1] <= pareto.LINE_TOL:
        return np.repeat(V[:1], n_points, axis=0)
    s = np.linspace(0.0, cum[-1], n_points)
    return np.column_stack([np.interp(s, cum, V[:, j]) for j in range(V.shape[1])])


def baseline_reference(front, kind: str = "r1.1") -> np.ndarray:
    ideal, nadir = front.min(axis=0), front.max(axis=0)
    if kind == "nadir+1":
        return nadir + 1.0
    return ideal + 1.1 * (nadir - ideal)


# --------------------------------------------------------------------------- loop


class _Runner:
    def __init__(self, config: RunConfig, objective: Callable, initial_design=None):
        self.cfg = config
        self.objective = objective
        self.initial_design = initial_design
        self.calls = 0

    def seed_for(self, *tags) -> int:
        return int(np.random.SeedSequence([self.cfg.seed, *tags]).generate_state(1)[0])

    def evaluate(self, x) -> np.ndarray:
        self.calls += 1
        y = np.asarray(self.objective(np.asarray(x, float)), float).ravel()
        if y.shape != (self.cfg.m,) or not np.all(np.isfinite(y)):
            raise ObjectiveError(f"objective returned {y!r} at {x!r}")
        return y

    def start(self) -> RunState:
        cfg = self.cfg
        if self.initial_design is None:
            X = maximin_lhs(cfg.n_init, cfg.d, self.seed_for(0, 0), cfg.lhs_tries)
        else:
            X = np.atleast_2d(np.asarray(self.initial_design, float))
            if X.shape != (cfg.n_init, cfg.d) or np.any((X < 0) | (X > 1)):
                raise ValueError(f"initial design must be a ({cfg.n_init}, {cfg.d}) array in the unit cube")
        Y = np.empty((0, cfg.m))
        state = RunState(cfg, np.empty((0, cfg.d)), Y, [])
        for x in X:
            t0 = time.perf_counter()
            try:
                y = self.evaluate(x)
            except ObjectiveError as exc:
                state.aborted = str(exc)
                return state
            self._append(state, x, y, PHASE_INIT, t0=t0)
        try:
            state.models = fit_models(state.X, state.Y, cfg.kernel, seed=self.seed_for(1, state.t))
        except (gp.ConditioningError, ValueError) as exc:
            state.aborted = f"model fit failed: {exc}"
        return state

    def _append(self, state, x, y, phase, target=None, unc=np.nan, acq=np.nan, t0=None):
        state.X = np.vstack([state.X, x])
        state.Y = np.vstack([state.Y, y])
        state.t += 1
        wall = time.perf_counter() - t0 if (t0 is not None and self.cfg.record_timing) else np.nan
        state.log.append(IterationRecord(state.t, np.array(x, float), np.array(y, float), phase,
                                         None if target is None else np.array(target, float),
                                         float(unc), float(acq), float(wall)))

    def step(self, state: RunState, x, phase, target, unc, acq, t0) -> bool:
        try:
            y = self.evaluate(x)
        except ObjectiveError as exc:
            state.aborted = str(exc)
            return False
        self._append(state, x, y, phase, target, unc, acq, t0)
        try:
            state.models = fit_models(state.X, state.Y, self.cfg.kernel, state.models,
                                      seed=self.seed_for(1, state.t))
        except (gp.ConditioningError, ValueError) as exc:
            state.aborted = f"model fit failed: {exc}"
            return False
        return True

    def phase_one_target(self, state: RunState, est: CenterEstimate):
        """Target of this iteration and the polyline (or segment) used for the uncertainty."""
        front = state.front
        if self.cfg.variant == "preference":
            ref = np.asarray(self.cfg.target, float)
            target = polyline_target(front, est.ideal_hat, ref, est.nadir_hat)
            path = polyline_points([est.ideal_hat, ref, est.nadir_hat], self.cfg.n_line)
        else:
            target = est.center_hat
            path = line_points(est.line_hat, self.cfg.n_line)
        return target, path

    def run(self) -> RunState:
        cfg = self.cfg
        state = self.start()
        if state.aborted or cfg.variant == "ehi":
            return self.run_baseline(state) if not state.aborted else state
        while state.phase == PHASE_ONE and state.t < cfg.budget:
            t0 = time.perf_counter()
            est = estimate_center(state.models, state.Y, cfg.estimation, seed=self.seed_for(2, state.t))
            state.current_center = est
            target, path = self.phase_one_target(state, est)
            field_ = DominationField(nd_ensemble(state.models, state.Y, cfg.estimation,
                                                 seed=self.seed_for(3, state.t)))
            p = field_(path)
            unc = float(np.mean(p * (1.0 - p)))
            if unc < cfg.epsilon1:
                state.phase = PHASE_TWO
                break
            target = repair_target(target, est.ideal_hat, est.nadir_hat, state.front)
            spec = AcquisitionSpec("mei", target, cfg.mc_samples)
            res = maximize(spec, state.models, state.front, seed=self.seed_for(4, state.t),
                           n_candidates=cfg.acq_candidates, n_refine=cfg.acq_refine)
            if not self.step(state, res.x, PHASE_ONE, target, unc, res.value, t0):
                return state
        if state.phase != PHASE_TWO:
            return state

        est = state.current_center
        start = target if cfg.variant == "preference" else est.center_hat
        sel = select_ref(state.models, start, est.nadir_hat, est.ideal_hat, cfg.budget - state.t,
                         cfg.planner, seed=self.seed_for(5, state.t))
        state.selection = sel
        state.ref_star = sel.ref
        spec = AcquisitionSpec("ehi", sel.ref, cfg.mc_samples)
        while state.t < cfg.budget:
            t0 = time.perf_counter()
            res = maximize(spec, state.models, state.front, seed=self.seed_for(6, state.t),
                           n_candidates=cfg.acq_candidates, n_refine=cfg.acq_refine)
            if not self.step(state, res.x, PHASE_TWO, sel.ref, np.nan, res.value, t0):
                break
        return state

    def run_baseline(self, state: RunState) -> RunState:
        cfg = self.cfg
        state.phase = PHASE_TWO
        while state.t < cfg.budget:
            t0 = time.perf_counter()
            ref = baseline_reference(state.front, cfg.baseline_ref)
            spec = AcquisitionSpec("ehi", ref, cfg.mc_samples)
            res = maximize(spec, state.models, state.front, seed=self.seed_for(6, state.t),
                           n_candidates=cfg.acq_candidates, n_refine=cfg.acq_refine)
            if not self.step(state, res.x, PHASE_TWO, ref, np.nan, res.value, t0):
                break
        return state

    def finish(self, state: RunState) -> RunState:
        if self.cfg.final_estimate and state.models and not state.aborted:
            state.final_center = estimate_center(state.models, state.Y, self.cfg.estimation,
                                                 seed=self.seed_for(7, state.t))
        return state


def run(config: RunConfig, objective: Callable, initial_design=None) -> RunState:
    """Run the center-targeting loop (or the configured variant) on ``objective``.

    ``initial_design`` replaces the maximin Latin hypercube (``n_init`` rows).
    """
    runner = _Runner(config, objective, initial_design)
    return runner.finish(runner.run())


def run_preference(config: RunConfig, objective: Callable, initial_design=None) -> RunState:
    if config.variant != "preference":
        raise ValueError("run_preference needs variant='preference' and a target")
    return run(config, objective, initial_design)


def run_baseline(config: RunConfig, objective: Callable, initial_design=None) -> RunState:
    """Plain EHI with a reference point derived from the empirical front each iteration."""
    return run(replace(config, variant="ehi"), objective, initial_design)
