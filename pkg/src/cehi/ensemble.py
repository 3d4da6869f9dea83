"""Simulated Pareto fronts and the estimation of Ideal, Nadir and center points.

Candidate designs for conditional simulation are drawn from a large Sobol pool
by importance sampling without replacement, with weights reflecting how likely
each design is to produce a new Ideal component, a new Nadir component, or a
non-dominated objective vector.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.special import ndtr
from scipy.stats import qmc

from . import pareto
from .gp import GPModel, predict_gradient

WEIGHT_FLOOR = 1e-300
MAX_EXACT_BOXES = 20_000


# --------------------------------------------------------------------------- probabilities


def prob_below(mean, sd, a):
    """P(Y < a) for Y ~ N(mean, sd^2); degenerate when sd == 0."""
    mean, sd, a = np.broadcast_arrays(np.asarray(mean, float), np.asarray(sd, float), np.asarray(a, float))
    with np.errstate(divide="ignore", invalid="ignore"):
        z = (a - mean) / sd
    det = np.where(a > mean, 1.0, 0.0)
    return np.where(sd > 0, ndtr(np.where(sd > 0, z, 0.0)), det)


def _interval_prob(mean, sd, lo, hi):
    """P(lo <= Y < hi), vectorized with infinite bounds allowed."""
    upper = np.where(np.isposinf(hi), 1.0, prob_below(mean, sd, np.where(np.isfinite(hi), hi, 0.0)))
    lower = np.where(np.isneginf(lo), 0.0, prob_below(mean, sd, np.where(np.isfinite(lo), lo, 0.0)))
    return np.clip(upper - lower, 0.0, 1.0)


def dominated_boxes(front) -> tuple[np.ndarray, np.ndarray]:
    """Disjoint boxes ``[lo, hi)`` whose union is the region weakly dominated by ``front``."""
    F = pareto.pareto_front(front)
    m = F.shape[1]
    if m == 1:
        return np.array([[F[:, 0].min()]]), np.array([[np.inf]])
    F = F[np.argsort(F[:, -1], kind="stable")]
    levels = np.append(F[1:, -1], np.inf)
    los, his = [], []
    for i in range(F.shape[0]):
        if not levels[i] > F[i, -1]:
            continue
        sub_lo, sub_hi = dominated_boxes(F[: i + 1, :-1])
        los.append(np.column_stack([sub_lo, np.full(len(sub_lo), F[i, -1])]))
        his.append(np.column_stack([sub_hi, np.full(len(sub_hi), levels[i])]))
    return np.vstack(los), np.vstack(his)


def _n_boxes_bound(k, m):
    return k ** max(m - 1, 1)


def nd_probability(means, sds, front, *, mc_draws: int = 1000, seed=0) -> np.ndarray:
    """Probability that independent Gaussian vectors are not dominated by ``front``.

    ``means`` and ``sds`` are ``(s, m)``. Exact through a disjoint box
    decomposition of the dominated region when it is small enough,
    Monte-Carlo otherwise.
    """
    means = np.atleast_2d(np.asarray(means, float))
    sds = np.atleast_2d(np.asarray(sds, float))
    F = pareto.pareto_front(front)
    if F.shape[0] == 0:
        return np.ones(means.shape[0])
    m = F.shape[1]
    if _n_boxes_bound(F.shape[0], m) <= MAX_EXACT_BOXES:
        lo, hi = dominated_boxes(F)
        dominated = np.zeros(means.shape[0])
        for b in range(lo.shape[0]):
            dominated += np.prod(_interval_prob(means, sds, lo[b], hi[b]), axis=1)
        return np.clip(1.0 - dominated, 0.0, 1.0)
    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((mc_draws, m))
    out = np.empty(means.shape[0])
    for i in range(means.shape[0]):
        out[i] = 1.0 - pareto.dominated_mask(F, means[i] + sds[i] * Z).mean()
    return out


def domination_probability(means, sds, target) -> np.ndarray:
    """P(Y weakly dominates ``target``) for independent Gaussian components."""
    le = np.where(np.atleast_2d(sds) > 0, prob_below(means, sds, target), np.asarray(means) <= target)
    return np.prod(le, axis=-1)


# --------------------------------------------------------------------------- candidate selection


@dataclass(frozen=True)
class CandidateSet:
    designs: np.ndarray
    indices: np.ndarray
    weights: np.ndarray
    purpose: str
    uniform_fallback: bool = False


@dataclass(frozen=True)
class PoolPosterior:
    designs: np.ndarray
    means: np.ndarray
    sds: np.ndarray

    @classmethod
    def compute(cls, models, designs) -> "PoolPosterior":
        posts = [model.predict(designs) for model in models]
        return cls(
            np.asarray(designs, float),
            np.column_stack([p.mean for p in posts]),
            np.column_stack([p.sd for p in posts]),
        )


def sobol_pool(d: int, size: int = 2 ** 14, seed=0) -> np.ndarray:
    exponent = int(np.ceil(np.log2(max(size, 2))))
    pts = qmc.Sobol(d, scramble=True, seed=seed).random_base2(exponent)
    return pts[:size]


def extreme_designs(models, pool: PoolPosterior, rho: float = 0.05, n_starts: int = 5) -> np.ndarray:
    """Designs minimizing one posterior mean with a small tie-breaking weight on the others.

    Minimizers of ``mean_j + rho * sum_{i != j} mean_i`` (means scaled by their
    range over the pool) approximate the extreme designs of the front, which a
    random pool almost never contains: its smallest ``f_j`` value may come with
    arbitrarily bad values of the other objectives. One design per objective.
    """
    lo, hi = pool.means.min(axis=0), pool.means.max(axis=0)
    scale = np.where(hi > lo, hi - lo, 1.0)
    m = len(models)
    box = [(0.0, 1.0)] * models[0].dim
    out = []
    for j in range(m):
        w = np.full(m, rho)
        w[j] = 1.0
        w = w / scale

        def fun(x, w=w):
            total, grad = 0.0, np.zeros_like(x)
            for wi, model in zip(w, models):
                mu, _, dmu, _ = predict_gradient(model, x)
                total += wi * mu
                grad += wi * dmu
            return total, grad

        starts = pool.designs[np.argsort(pool.means @ w, kind="stable")[:n_starts]]
        best = min((minimize(fun, x0, jac=True, method="L-BFGS-B", bounds=box) for x0 in starts),
                   key=lambda r: r.fun)
        out.append(np.clip(best.x, 0.0, 1.0))
    return np.array(out)


def enriched_pool(models, d: int, size: int, seed, extremes: bool = True) -> PoolPosterior:
    """Sobol pool, optionally extended by the extreme designs of the current posterior means."""
    pool = PoolPosterior.compute(models, sobol_pool(d, size, seed))
    if not extremes:
        return pool
    extra = extreme_designs(models, pool)
    return PoolPosterior.compute(models, np.vstack([pool.designs, extra]))


def weighted_sample(weights, k: int, rng) -> tuple[np.ndarray, bool]:
    """Sample ``k`` indices without replacement with probability proportional to ``weights``.

    Uses exponential keys (Efraimidis-Spirakis). Zero-weight items are only picked,
    uniformly, once the positive-weight ones are exhausted. If every weight is
    below ``WEIGHT_FLOOR`` the sampling is uniform and the returned flag is set.
    """
    w = np.asarray(weights, float)
    n = len(w)
    k = min(k, n)
    fallback = not np.any(w > WEIGHT_FLOOR)
    if fallback:
        w = np.ones(n)
    u = rng.random(n)
    tie = rng.random(n)
    with np.errstate(divide="ignore", over="ignore"):
        keys = np.where(w > 0, np.log(u) / np.where(w > 0, w, 1.0), -np.inf)
    order = np.lexsort((-tie, -keys))
    return np.sort(order[:k]), fallback


def _as_pool(models, pool) -> PoolPosterior:
    return pool if isinstance(pool, PoolPosterior) else PoolPosterior.compute(models, pool)


def _finish(pool: PoolPosterior, weights, k, seed, purpose) -> CandidateSet:
    idx, fallback = weighted_sample(weights, k, np.random.default_rng(seed))
    return CandidateSet(pool.designs[idx], idx, np.asarray(weights)[idx], purpose, fallback)


def ideal_weights(pool: PoolPosterior, j: int, threshold: float) -> np.ndarray:
    return prob_below(pool.means[:, j], pool.sds[:, j], threshold)


def nadir_weights(pool: PoolPosterior, j: int, empirical_front) -> np.ndarray:
    """Probability of producing a new ``j``-th extreme point.

    Sum of P(ND without objective j) * P(Y_j > nu_j) and P(Y dominates nu), where
    ``nu`` is the current ``j``-th extreme point of the empirical front.
    """
    F = pareto.pareto_front(empirical_front)
    m = F.shape[1]
    nu = pareto.extreme_points(F)[j]
    others = [i for i in range(m) if i != j]
    nd_rest = nd_probability(pool.means[:, others], pool.sds[:, others], F[:, others])
    above = 1.0 - prob_below(pool.means[:, j], pool.sds[:, j], nu[j])
    beat = domination_probability(pool.means, pool.sds, nu)
    return np.clip(nd_rest * above + beat, 0.0, 1.0)


def select_ideal_candidates(models, pool, j: int, k: int, *, seed=0, threshold=None) -> CandidateSet:
    pool = _as_pool(models, pool)
    if threshold is None:
        threshold = float(np.min(models[j].train_outputs))
    return _finish(pool, ideal_weights(pool, j, threshold), k, seed, f"ideal_component({j})")


def select_nadir_candidates(models, pool, j: int, empirical_front, k: int, *, seed=0) -> CandidateSet:
    if len(empirical_front) == 0:
        raise ValueError("the empirical front must be non-empty")
    pool = _as_pool(models, pool)
    return _finish(pool, nadir_weights(pool, j, empirical_front), k, seed, f"nadir_component({j})")


def select_nd_candidates(models, pool, empirical_front, k: int, *, seed=0) -> CandidateSet:
    pool = _as_pool(models, pool)
    weights = nd_probability(pool.means, pool.sds, empirical_front, seed=seed)
    return _finish(pool, weights, k, seed, "nd_front")


# --------------------------------------------------------------------------- simulated fronts


@dataclass(frozen=True)
class FrontEnsemble:
    fronts: list
    seed: int | None = None

    @property
    def n_sim(self) -> int:
        return len(self.fronts)

    def ideals(self) -> np.ndarray:
        return np.array([f.min(axis=0) for f in self.fronts])

    def nadirs(self, tradeoff: float | None = None, scale=None) -> np.ndarray:
        """Per-front Nadir points, optionally over the properly efficient points only."""
        if tradeoff is None:
            return np.array([f.max(axis=0) for f in self.fronts])
        return np.array([proper_front(f, tradeoff, scale).max(axis=0) for f in self.fronts])

    def all_points(self) -> np.ndarray:
        return np.vstack(self.fronts)


def proper_front(front, tradeoff: float, scale=None) -> np.ndarray:
    """Drop front points whose gain on one objective costs more than ``tradeoff`` times as much.

    A point ``b`` is removed when some ``a`` satisfies
    ``max_i (b_i - a_i) > tradeoff * max_j (a_j - b_j)`` on objectives divided by ``scale``.
    Such points sit where the front is almost parallel to an axis, so that an
    arbitrarily small improvement in one objective is paid by a large loss in
    another; on a finite candidate set they are mostly artifacts of posterior noise.
    """
    F = np.atleast_2d(np.asarray(front, float))
    if F.shape[0] < 2:
        return F
    scale = np.ones(F.shape[1]) if scale is None else np.where(np.asarray(scale) > 0, scale, 1.0)
    Z = F / scale
    D = Z[:, None, :] - Z[None, :, :]  # D[b, a] = b - a
    worse = D.max(axis=2)
    better = (-D).max(axis=2)
    improper = np.any(worse > tradeoff * np.maximum(better, 0.0), axis=1)
    return F[~improper] if np.any(~improper) else F


def simulate_objectives(models, designs, n_sim: int, seed=0) -> np.ndarray:
    """Joint conditional draws of every objective, shape ``(n_sim, s, m)``."""
    seeds = np.random.SeedSequence(seed).spawn(len(models))
    sims = [model.simulate(designs, n_sim, np.random.default_rng(s)) for model, s in zip(models, seeds)]
    return np.stack(sims, axis=-1)


def simulate_fronts(models, designs, n_sim: int, seed=0, observed=None) -> FrontEnsemble:
    """Simulate ``n_sim`` fronts at ``designs``; ``observed`` objective vectors join every front."""
    designs = np.atleast_2d(np.asarray(designs, float))
    sims = simulate_objectives(models, designs, n_sim, seed)
    extra = None if observed is None else np.atleast_2d(np.asarray(observed, float))
    fronts = []
    for k in range(n_sim):
        pts = sims[k] if extra is None else np.vstack([sims[k], extra])
        fronts.append(pareto.pareto_front(pts))
    return FrontEnsemble(fronts, seed)


# --------------------------------------------------------------------------- center estimation


@dataclass(frozen=True)
class EstimationConfig:
    pool_size: int = 2 ** 14
    n_candidates: int = 1000
    n_sim: int = 200
    include_observations: bool = True
    extreme_designs: bool = True
    nadir_tradeoff: float | None = 20.0


@dataclass(frozen=True)
class CenterEstimate:
    ideal_hat: np.ndarray
    nadir_hat: np.ndarray
    center_hat: np.ndarray
    center_t: float
    ensemble: FrontEnsemble = field(repr=False)
    candidates: np.ndarray = field(repr=False)
    from_empirical_front: bool = False

    @property
    def line_hat(self) -> tuple[np.ndarray, np.ndarray]:
        return self.ideal_hat, self.nadir_hat


def observed_outputs(models) -> np.ndarray:
    return np.column_stack([model.train_outputs for model in models])


def estimate_center(models: list[GPModel], observations=None, config: EstimationConfig = EstimationConfig(),
                    seed=0) -> CenterEstimate:
    """Estimate Ideal, Nadir and center from fronts simulated at importance-sampled designs."""
    Y = observed_outputs(models) if observations is None else np.atleast_2d(observations)
    m = Y.shape[1]
    d = models[0].dim
    empirical = pareto.pareto_front(Y)
    seeds = np.random.SeedSequence(seed).generate_state(2 * m + 2)
    pool = enriched_pool(models, d, config.pool_size, int(seeds[0]), config.extreme_designs)
    per_component = max(1, config.n_candidates // (2 * m))
    chosen = []
    for j in range(m):
        chosen.append(select_ideal_candidates(models, pool, j, per_component, seed=int(seeds[1 + j]),
                                              threshold=float(Y[:, j].min())).indices)
        chosen.append(select_nadir_candidates(models, pool, j, empirical, per_component,
                                              seed=int(seeds[1 + m + j])).indices)
    idx = np.unique(np.concatenate(chosen))
    designs = pool.designs[idx]
    ensemble = simulate_fronts(models, designs, config.n_sim, int(seeds[-1]),
                               observed=Y if config.include_observations else None)
    ideal = np.median(ensemble.ideals(), axis=0)
    nadir = np.median(ensemble.nadirs(), axis=0)
    if config.nadir_tradeoff is not None:
        span = np.maximum(nadir - ideal, 1e-12)
        nadir = np.median(ensemble.nadirs(config.nadir_tradeoff, span), axis=0)
    nadir = np.maximum(nadir, ideal + 1e-9)

    sim_points = ensemble.all_points()
    # Observed front points stay candidates: once the center region is sampled, the only
    # simulated points still ND w.r.t. the observations can sit far from the line.
    novel = sim_points[~pareto.dominated_mask(empirical, sim_points)]
    source = np.vstack([empirical, novel])
    if np.linalg.norm(nadir - ideal) <= pareto.LINE_TOL:
        center, t, fallback = ideal.copy(), 0.0, novel.shape[0] == 0
    else:
        center, t, k = pareto.project_closest(source, ideal, nadir)
        fallback = bool(k < empirical.shape[0])
    return CenterEstimate(ideal, nadir, center, t, ensemble, designs, fallback)


def nd_ensemble(models, observations=None, config: EstimationConfig = EstimationConfig(), seed=0) -> FrontEnsemble:
    """Fronts simulated at designs selected by their probability of being non-dominated."""
    Y = observed_outputs(models) if observations is None else np.atleast_2d(observations)
    d = models[0].dim
    seeds = np.random.SeedSequence(seed).generate_state(3)
    pool = PoolPosterior.compute(models, sobol_pool(d, config.pool_size, int(seeds[0])))
    cand = select_nd_candidates(models, pool, pareto.pareto_front(Y), config.n_candidates, seed=int(seeds[1]))
    return simulate_fronts(models, cand.designs, config.n_sim, int(seeds[2]),
                           observed=Y if config.include_observations else None)

