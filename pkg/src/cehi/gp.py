"""Ordinary-kriging Gaussian processes for a single objective.

A model has a constant trend estimated by generalized least squares, an
anisotropic stationary kernel (Matern 5/2 or squared exponential) and a
process variance. Hyperparameters are estimated by maximizing the
concentrated (profile) log-likelihood. Posterior covariances include the
correction term that accounts for the estimation of the constant mean.

Inputs are expected to live in the unit hypercube.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular, LinAlgError
from scipy.optimize import minimize
from scipy.stats import qmc

KERNELS = ("matern52", "squared_exponential")

LENGTHSCALE_BOUNDS = (1e-3, 10.0)
# Relative jitter ladder, multiplied by the process variance.
JITTER_LADDER = (0.0,) + tuple(10.0 ** -k for k in range(10, 3, -1))
SQRT5 = np.sqrt(5.0)


class ConditioningError(RuntimeError):
    """Raised when a covariance matrix cannot be factorized even with maximal jitter."""


@dataclass(frozen=True)
class Kernel:
    family: str
    lengthscales: np.ndarray
    variance: float

    def __post_init__(self):
        if self.family not in KERNELS:
            raise ValueError(f"unknown kernel family {self.family!r}, expected one of {KERNELS}")
        ls = np.atleast_1d(np.asarray(self.lengthscales, dtype=float))
        object.__setattr__(self, "lengthscales", ls)
        if np.any(ls <= 0) or not np.all(np.isfinite(ls)):
            raise ValueError("lengthscales must be strictly positive")
        if not self.variance > 0:
            raise ValueError("variance must be strictly positive")

    def correlation(self, A: np.ndarray, B: np.ndarray) -> np.ndarray:
        return _correlation(self.family, A, B, self.lengthscales)

    def covariance(self, A: np.ndarray, B: np.ndarray) -> np.ndarray:
        return self.variance * self.correlation(A, B)


def _scaled_sq_diffs(A, B, lengthscales):
    diff = (A[:, None, :] - B[None, :, :]) / lengthscales
    return diff * diff


def _corr_from_r(family, r):
    if family == "matern52":
        sr = SQRT5 * r
        return (1.0 + sr + sr * sr / 3.0) * np.exp(-sr)
    return np.exp(-0.5 * r * r)


def _correlation(family, A, B, lengthscales):
    A = np.atleast_2d(A)
    B = np.atleast_2d(B)
    r = np.sqrt(_scaled_sq_diffs(A, B, lengthscales).sum(axis=-1))
    return _corr_from_r(family, r)


def _corr_and_loggrad(family, X, lengthscales):
    """Correlation matrix and its derivatives w.r.t. log-lengthscales, shape (d, n, n)."""
    D = _scaled_sq_diffs(X, X, lengthscales)
    r = np.sqrt(D.sum(axis=-1))
    if family == "matern52":
        sr = SQRT5 * r
        e = np.exp(-sr)
        R = (1.0 + sr + sr * sr / 3.0) * e
        factor = (5.0 / 3.0) * (1.0 + sr) * e
    else:
        R = np.exp(-0.5 * r * r)
        factor = R
    dR = np.moveaxis(factor[:, :, None] * D, -1, 0)
    return R, dR


def _corr_grad_x(family, x, X, lengthscales):
    """Derivative of corr(x, X_i) w.r.t. x, shape (n, d)."""
    diff = (x[None, :] - X) / lengthscales
    r = np.sqrt((diff * diff).sum(axis=-1))
    if family == "matern52":
        sr = SQRT5 * r
        factor = -(5.0 / 3.0) * (1.0 + sr) * np.exp(-sr)
    else:
        factor = -np.exp(-0.5 * r * r)
    corr = _corr_from_r(family, r)
    return corr, factor[:, None] * diff / lengthscales


def _jittered_cholesky(M, scale, start=JITTER_LADDER[0]):
    """Lower Cholesky factor of M + jitter*scale*I, trying the jitter ladder from ``start``."""
    n = M.shape[0]
    eye = np.eye(n)
    for jitter in JITTER_LADDER:
        if jitter < start * (1 - 1e-12):
            continue
        try:
            return cholesky(M + jitter * scale * eye, lower=True), jitter
        except LinAlgError:
            continue
    raise ConditioningError(
        f"matrix of size {n} not factorizable with jitter up to {JITTER_LADDER[-1]:g}"
    )


@dataclass(frozen=True)
class Posterior:
    mean: np.ndarray
    sd: np.ndarray
    cross_cov: np.ndarray | None = None


@dataclass(frozen=True)
class GPModel:
    """A conditioned Gaussian process. Immutable after construction."""

    kernel: Kernel
    mean: float
    nugget: float
    train_inputs: np.ndarray
    train_outputs: np.ndarray
    chol_factor: np.ndarray
    alpha: np.ndarray
    ones_solve: np.ndarray = field(repr=False)
    jitter: float = JITTER_LADDER[0]

    @property
    def n(self) -> int:
        return self.train_inputs.shape[0]

    @property
    def dim(self) -> int:
        return self.train_inputs.shape[1]

    @property
    def mean_precision(self) -> float:
        """1' K^-1 1 with K the (jittered) training covariance."""
        return float(self.ones_solve.sum())

    @property
    def max_variance(self) -> float:
        """Posterior variance far from every observation."""
        return self.kernel.variance + 1.0 / self.mean_precision

    def log_likelihood(self) -> float:
        resid = self.train_outputs - self.mean
        logdet = 2.0 * np.log(np.diag(self.chol_factor)).sum()
        return float(-0.5 * (resid @ self.alpha + logdet + self.n * np.log(2 * np.pi)))

    def predict(self, query, want_cov: bool = False) -> Posterior:
        return predict(self, query, want_cov)

    def simulate(self, query, n_sim: int, rng_seed=None) -> np.ndarray:
        return simulate(self, query, n_sim, rng_seed)

    def condition_on(self, inputs, outputs) -> "GPModel":
        """Append observations keeping kernel hyperparameters; the mean is re-estimated."""
        X = np.vstack([self.train_inputs, np.atleast_2d(inputs)])
        Y = np.concatenate([self.train_outputs, np.atleast_1d(outputs)])
        return _build(self.kernel, X, Y, start_jitter=self.jitter)


def _build(kernel: Kernel, X, Y, mean=None, start_jitter=JITTER_LADDER[0]) -> GPModel:
    K = kernel.covariance(X, X)
    L, jitter = _jittered_cholesky(K, kernel.variance, start_jitter)
    ones = np.ones(len(Y))
    ones_solve = cho_solve((L, True), ones)
    if mean is None:
        mean = float(ones_solve @ Y / ones_solve.sum())
    alpha = cho_solve((L, True), Y - mean)
    return GPModel(
        kernel=kernel,
        mean=float(mean),
        nugget=jitter * kernel.variance,
        train_inputs=X,
        train_outputs=Y,
        chol_factor=L,
        alpha=alpha,
        ones_solve=ones_solve,
        jitter=jitter,
    )


def _check_data(inputs, outputs):
    X = np.atleast_2d(np.asarray(inputs, dtype=float))
    Y = np.asarray(outputs, dtype=float).ravel()
    if X.shape[0] != Y.shape[0]:
        raise ValueError(f"{X.shape[0]} inputs but {Y.shape[0]} outputs")
    if Y.shape[0] < 2:
        raise ValueError("at least two observations are required to fit a GP")
    if not np.all(np.isfinite(Y)) or not np.all(np.isfinite(X)):
        raise ValueError("inputs and outputs must be finite")
    return X, Y


def _profile(log_ls, family, X, Y, with_grad=True):
    """Negative concentrated log-likelihood (and gradient wrt log-lengthscales)."""
    n = len(Y)
    ls = np.exp(log_ls)
    R, dR = _corr_and_loggrad(family, X, ls)
    try:
        L, jitter = _jittered_cholesky(R, 1.0)
    except ConditioningError:
        return (1e20, np.zeros_like(log_ls)) if with_grad else 1e20
    ones_solve = cho_solve((L, True), np.ones(n))
    mu = ones_solve @ Y / ones_solve.sum()
    resid = Y - mu
    a = cho_solve((L, True), resid)
    sigma2 = max(resid @ a / n, 1e-300)
    logdet = 2.0 * np.log(np.diag(L)).sum()
    nll = 0.5 * (n * np.log(sigma2) + logdet + n * (np.log(2 * np.pi) + 1.0))
    if not with_grad:
        return nll
    Rinv = cho_solve((L, True), np.eye(n))
    grad = np.empty_like(log_ls)
    for k in range(len(log_ls)):
        grad[k] = -(0.5 * a @ dR[k] @ a / sigma2 - 0.5 * np.sum(Rinv * dR[k]))
    return nll, grad


def profile_log_likelihood(inputs, outputs, kernel_family: str, lengthscales) -> float:
    """Concentrated log-likelihood of ``lengthscales`` (mean and variance profiled out)."""
    X, Y = _check_data(inputs, outputs)
    return -float(_profile(np.log(np.asarray(lengthscales, float)), kernel_family, X, Y, False))


def fit(
    inputs,
    outputs,
    kernel_family: str = "matern52",
    *,
    lengthscales=None,
    variance: float | None = None,
    n_starts: int = 10,
    seed: int = 0,
    warm_start=None,
) -> GPModel:
    """Fit an ordinary-kriging GP.

    When ``lengthscales`` is given the likelihood maximization is skipped; the
    variance then defaults to its profile estimate. Otherwise the log-lengthscales
    are optimized by multistart L-BFGS-B within ``LENGTHSCALE_BOUNDS``.
    """
    if kernel_family not in KERNELS:
        raise ValueError(f"unknown kernel family {kernel_family!r}")
    X, Y = _check_data(inputs, outputs)
    d = X.shape[1]
    if lengthscales is None:
        lo, hi = np.log(LENGTHSCALE_BOUNDS[0]), np.log(LENGTHSCALE_BOUNDS[1])
        sampler = qmc.Halton(d, scramble=True, seed=seed)
        starts = list(np.log(0.05) + sampler.random(max(n_starts, 1)) * np.log(2.0 / 0.05))
        if warm_start is not None:
            starts[0] = np.clip(np.log(np.asarray(warm_start, float)), lo, hi)
        best = None
        for x0 in starts:
            res = minimize(
                _profile, x0, args=(kernel_family, X, Y), jac=True,
                method="L-BFGS-B", bounds=[(lo, hi)] * d, options={"maxiter": 100},
            )
            if best is None or res.fun < best.fun:
                best = res
        log_ls = best.x
    else:
        log_ls = np.log(np.broadcast_to(np.asarray(lengthscales, float), (d,)))
    ls = np.exp(log_ls)
    if variance is None:
        R = _correlation(kernel_family, X, X, ls)
        L, _ = _jittered_cholesky(R, 1.0)
        ones_solve = cho_solve((L, True), np.ones(len(Y)))
        mu = ones_solve @ Y / ones_solve.sum()
        variance = float((Y - mu) @ cho_solve((L, True), Y - mu) / len(Y))
        if not variance > 0:
            variance = 1e-12
    return _build(Kernel(kernel_family, ls, variance), X, Y)


def predict(model: GPModel, query, want_cov: bool = False) -> Posterior:
    Q = np.atleast_2d(np.asarray(query, dtype=float))
    kx = model.kernel.covariance(Q, model.train_inputs)
    mean = model.mean + kx @ model.alpha
    v = solve_triangular(model.chol_factor, kx.T, lower=True)
    u = 1.0 - kx @ model.ones_solve
    q = model.mean_precision
    var = model.kernel.variance - np.einsum("ij,ij->j", v, v) + u * u / q
    sd = np.sqrt(np.maximum(var, 0.0))
    cov = None
    if want_cov:
        cov = model.kernel.covariance(Q, Q) - v.T @ v + np.outer(u, u) / q
        cov = 0.5 * (cov + cov.T)
    return Posterior(mean, sd, cov)


def predict_gradient(model: GPModel, x):
    """Posterior mean and sd at a single point with their gradients wrt the input."""
    x = np.asarray(x, dtype=float).ravel()
    k = model.kernel
    corr, dcorr = _corr_grad_x(k.family, x, model.train_inputs, k.lengthscales)
    kx = k.variance * corr
    dkx = k.variance * dcorr
    mean = model.mean + kx @ model.alpha
    dmean = dkx.T @ model.alpha
    Kinv_k = cho_solve((model.chol_factor, True), kx)
    u = 1.0 - kx @ model.ones_solve
    q = model.mean_precision
    var = k.variance - kx @ Kinv_k + u * u / q
    dvar = -2.0 * dkx.T @ Kinv_k - 2.0 * u * (dkx.T @ model.ones_solve) / q
    if var <= 0:
        return float(mean), 0.0, dmean, np.zeros_like(x)
    sd = np.sqrt(var)
    return float(mean), float(sd), dmean, dvar / (2.0 * sd)


# Number of query points above which joint simulation is refused.
SIMULATION_CAP = 5000


def simulate(model: GPModel, query, n_sim: int, rng_seed=None) -> np.ndarray:
    """Joint posterior draws at ``query``; returns an (n_sim, s) array."""
    Q = np.atleast_2d(np.asarray(query, dtype=float))
    if Q.shape[0] > SIMULATION_CAP:
        raise ValueError(f"{Q.shape[0]} simulation points exceed the cap of {SIMULATION_CAP}")
    post = predict(model, Q, want_cov=True)
    rng = np.random.default_rng(rng_seed)
    z = rng.standard_normal((n_sim, Q.shape[0]))
    # jitter relative to the largest posterior variance, so near-certain points stay near-certain
    scale = float(np.max(np.abs(np.diag(post.cross_cov))))
    if not scale > 0:
        return np.tile(post.mean, (n_sim, 1))
    try:
        L, _ = _jittered_cholesky(post.cross_cov, scale, JITTER_LADDER[1])
    except ConditioningError:
        # numerically rank-deficient: symmetric square root with clipped eigenvalues
        lam, V = np.linalg.eigh(post.cross_cov)
        L = V * np.sqrt(np.clip(lam, 0.0, None))
    return post.mean[None, :] + z @ L.T


def with_data(model: GPModel, inputs, outputs) -> GPModel:
    """Same hyperparameters, different training data."""
    X, Y = _check_data(inputs, outputs)
    return _build(model.kernel, X, Y)


__all__ = [
    "ConditioningError",
    "GPModel",
    "KERNELS",
    "Kernel",
    "Posterior",
    "fit",
    "predict",
    "predict_gradient",
    "profile_log_likelihood",
    "simulate",
    "with_data",
]
