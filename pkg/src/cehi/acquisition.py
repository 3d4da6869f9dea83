"""Infill criteria (EI, mEI, EHI) and their maximization over the unit hypercube."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.special import ndtr
from scipy.stats import qmc

from . import pareto
from .gp import GPModel, predict_gradient

_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def _pdf(z):
    z = np.clip(z, -50.0, 50.0)  # avoids overflow in z * z; the density is 0 there anyway
    return _INV_SQRT_2PI * np.exp(-0.5 * z * z)


def ei(mean, sd, threshold):
    """Expected improvement below ``threshold`` of a Gaussian N(mean, sd^2)."""
    mean, sd, threshold = np.broadcast_arrays(
        np.asarray(mean, float), np.asarray(sd, float), np.asarray(threshold, float)
    )
    gain = np.atleast_1d(threshold - mean)
    sd = np.atleast_1d(sd)
    out = np.maximum(gain, 0.0)
    pos = sd > 0
    if np.any(pos):
        g, s = gain[pos], sd[pos]
        z = g / s
        out[pos] = np.maximum(g * ndtr(z) + s * _pdf(z), 0.0)
    return out.reshape(mean.shape) if mean.ndim else float(out[0])


def mei(means, sds, ref):
    """Product over objectives of the per-objective EI below ``ref``.

    ``means`` and ``sds`` have objectives on their last axis.
    """
    return np.prod(ei(means, sds, np.asarray(ref, float)), axis=-1)


def mei_gradient(models: list[GPModel], x, ref):
    """Analytic gradient of mEI at ``x``.

    Returns ``(gradient, ok)``; ``ok`` is False (and the gradient zero) when some
    posterior standard deviation vanishes at ``x`` (below 1e-6 prior sd).
    """
    x = np.asarray(x, float)
    values, grads = [], []
    for model, r in zip(models, ref):
        mu, s, dmu, ds = predict_gradient(model, x)
        if s <= 1e-6 * np.sqrt(model.kernel.variance):
            return np.zeros_like(x), False
        z = (r - mu) / s
        values.append(max((r - mu) * ndtr(z) + s * _pdf(z), 0.0))
        grads.append(-ndtr(z) * dmu + _pdf(z) * ds)
    values = np.asarray(values)
    total = np.zeros_like(x)
    for i, g in enumerate(grads):
        total += g * np.prod(np.delete(values, i))
    return total, True


def _ehi_2d(means, sds, front, ref):
    lower, upper, height = pareto._box_strips(front, ref)
    mu1, s1 = means[:, :1], sds[:, :1]
    ei_upper = ei(mu1, s1, upper[None, :])
    finite = np.isfinite(lower)
    ei_lower = np.where(finite[None, :], ei(mu1, s1, np.where(finite, lower, 0.0)[None, :]), 0.0)
    ei_height = ei(means[:, 1:2], sds[:, 1:2], height[None, :])
    return np.sum((ei_upper - ei_lower) * ei_height, axis=1)


def ehi_from_posterior(means, sds, front, ref, mc_samples: int = 10_000, seed=0, return_stderr=False):
    """EHI for each row of (means, sds); exact for m = 2, Monte-Carlo otherwise."""
    means = np.atleast_2d(np.asarray(means, float))
    sds = np.atleast_2d(np.asarray(sds, float))
    ref = np.asarray(ref, float)
    m = means.shape[1]
    F = pareto._as_points(front) if front is not None and len(front) else np.empty((0, m))
    if m == 2:
        val = _ehi_2d(means, sds, F, ref)
        return (val, np.zeros_like(val)) if return_stderr else val
    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((mc_samples, m))
    vals = np.empty(means.shape[0])
    errs = np.empty(means.shape[0])
    for i in range(means.shape[0]):
        imp = pareto.hv_improvements(F, means[i] + sds[i] * Z, ref)
        vals[i] = imp.mean()
        errs[i] = imp.std(ddof=1) / np.sqrt(mc_samples)
    return (vals, errs) if return_stderr else vals


def _posterior_matrix(models, X):
    posts = [model.predict(X) for model in models]
    return np.column_stack([p.mean for p in posts]), np.column_stack([p.sd for p in posts])


def ehi(models, x, front, ref, mc_samples: int = 100_000, seed=0) -> float:
    means, sds = _posterior_matrix(models, np.atleast_2d(x))
    return float(ehi_from_posterior(means, sds, front, ref, mc_samples, seed)[0])


@dataclass(frozen=True)
class AcquisitionSpec:
    kind: str
    ref_point: np.ndarray
    mc_samples: int = 10_000

    def __post_init__(self):
        if self.kind not in ("ei", "mei", "ehi"):
            raise ValueError(f"unknown criterion {self.kind!r}")
        ref = np.atleast_1d(np.asarray(self.ref_point, float))
        object.__setattr__(self, "ref_point", ref)
        if not np.all(np.isfinite(ref)):
            raise ValueError("reference point must be finite")
        if self.mc_samples < 1000:
            raise ValueError("mc_samples must be at least 1000")


@dataclass(frozen=True)
class AcquisitionResult:
    x: np.ndarray
    value: float
    flat: bool
    best_candidate_value: float


def score(spec: AcquisitionSpec, models, front, X, seed=0) -> np.ndarray:
    means, sds = _posterior_matrix(models, X)
    if spec.kind == "ehi":
        return ehi_from_posterior(means, sds, front, spec.ref_point, spec.mc_samples, seed)
    if spec.kind == "ei":
        return ei(means[:, 0], sds[:, 0], spec.ref_point[0])
    return mei(means, sds, spec.ref_point)


def maximize(
    spec: AcquisitionSpec,
    models,
    front=None,
    bounds=None,
    *,
    seed=0,
    n_candidates: int = 2000,
    n_refine: int = 5,
    candidates=None,
) -> AcquisitionResult:
    """Multistart maximization: score a Halton candidate set, refine the best few locally."""
    d = models[0].dim
    bounds = np.array([[0.0, 1.0]] * d) if bounds is None else np.asarray(bounds, float)
    lo, hi = bounds[:, 0], bounds[:, 1]
    if candidates is None:
        candidates = lo + qmc.Halton(d, scramble=True, seed=seed).random(n_candidates) * (hi - lo)
    values = score(spec, models, front, candidates, seed)
    best_raw = int(np.argmax(values))
    if not values[best_raw] > 0:
        posts = [model.predict(candidates) for model in models]
        spread = sum((p.sd ** 2) / model.kernel.variance for p, model in zip(posts, models))
        i = int(np.argmax(spread))
        return AcquisitionResult(candidates[i].copy(), float(values[i]), True, float(values[i]))

    best_x, best_v = candidates[best_raw].copy(), float(values[best_raw])
    order = np.argsort(-values, kind="stable")[:n_refine]
    box = list(zip(lo, hi))
    for i in order:
        v0 = float(values[i])
        if not v0 > 0:
            continue
        if spec.kind == "mei":
            def fun(z, v0=v0):
                z = np.clip(z, lo, hi)
                val = float(score(spec, models, front, z[None, :])[0])
                grad, _ = mei_gradient(models, z, spec.ref_point)
                return -val / v0, -grad / v0
            res = minimize(fun, candidates[i], jac=True, method="L-BFGS-B", bounds=box,
                           options={"maxiter": 200})
        else:
            def fun(z, v0=v0):
                return -float(score(spec, models, front, np.clip(z, lo, hi)[None, :], seed)[0]) / v0
            res = minimize(fun, candidates[i], method="Nelder-Mead", bounds=box,
                           options={"maxiter": 100 * d, "xatol": 1e-6, "fatol": 1e-10})
        x = np.clip(res.x, lo, hi)
        v = float(score(spec, models, front, x[None, :], seed)[0])
        if v > best_v:
            best_x, best_v = x, v
    return AcquisitionResult(best_x, best_v, False, float(values[best_raw]))
