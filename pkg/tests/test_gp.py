import numpy as np
import pytest
from hypothesis import given, strategies as st

from cehi import gp
from oracles import dense_kriging

X5 = np.array([[0.05], [0.3], [0.45], [0.7], [0.95]])
Y5 = np.sin(6 * X5[:, 0]) + X5[:, 0]


def toy_model(n=8, d=2, seed=0, **kw):
    rng = np.random.default_rng(seed)
    X = rng.random((n, d))
    Y = np.sin(3 * X[:, 0]) + X[:, 1] ** 2
    return gp.fit(X, Y, **kw), X, Y


def test_fit_rejects_single_point():
    with pytest.raises(ValueError):
        gp.fit([[0.5]], [1.0])


def test_fit_rejects_nonfinite():
    with pytest.raises(ValueError):
        gp.fit([[0.1], [0.5]], [1.0, np.nan])


def test_fixed_hyperparameters_interpolate_on_a_line():
    X = np.array([[0.1], [0.5], [0.9]])
    Y = np.array([1.0, 2.0, 3.0])
    model = gp.fit(X, Y, lengthscales=0.3, variance=1.0)
    assert np.allclose(model.predict(X).mean, Y, atol=1e-8)


@pytest.mark.parametrize("family", gp.KERNELS)
def test_predictor_matches_dense_solve(family):
    model = gp.fit(X5, Y5, family, lengthscales=0.3, variance=1.0)
    Q = np.linspace(0, 1, 41)[:, None]
    mean, cov, mu = dense_kriging(X5, Y5, Q, np.array([0.3]), 1.0, family)
    post = model.predict(Q, want_cov=True)
    assert model.mean == pytest.approx(mu, abs=1e-10)
    assert np.allclose(post.mean, mean, atol=1e-10)
    assert np.allclose(post.cross_cov, cov, atol=1e-8)
    assert np.allclose(post.sd ** 2, np.clip(np.diag(cov), 0, None), atol=1e-8)


def test_sd_vanishes_at_training_inputs():
    model, X, _ = toy_model()
    sigma = np.sqrt(model.kernel.variance)
    assert np.all(model.predict(X).sd <= 1e-6 * sigma + 1e-5 * sigma)


def test_far_field_variance_limit():
    model = gp.fit(X5, Y5, "squared_exponential", lengthscales=0.01, variance=2.0)
    q = model.mean_precision
    far = model.predict([[0.175]]).sd[0] ** 2  # no correlation above 1e-12 with any datum
    expected = 2.0 * (1.0 + 1.0 / (2.0 * q))
    assert far == pytest.approx(expected, rel=1e-6)
    assert far == pytest.approx(model.max_variance, rel=1e-6)


def test_duplicated_query_covariance():
    model, _, _ = toy_model()
    post = model.predict([[0.3, 0.7], [0.3, 0.7]], want_cov=True)
    G = post.cross_cov
    assert G[0, 0] == pytest.approx(G[1, 1], abs=1e-10)
    assert G[0, 1] == pytest.approx(G[0, 0], abs=1e-10)


def test_covariance_is_psd():
    model, _, _ = toy_model()
    Q = np.random.default_rng(1).random((30, 2))
    G = model.predict(Q, want_cov=True).cross_cov
    assert np.allclose(G, G.T)
    assert np.linalg.eigvalsh(G).min() >= -1e-8 * np.trace(G)


def test_simulation_clt_bound():
    model, _, _ = toy_model()
    x = np.array([[0.42, 0.17]])
    post = model.predict(x)
    draws = model.simulate(x, 10_000, rng_seed=3)
    assert draws.shape == (10_000, 1)
    assert abs(draws.mean() - post.mean[0]) <= 4 * post.sd[0] / 100


def test_simulation_at_training_points():
    model, X, Y = toy_model()
    draws = model.simulate(X[:3], 50, rng_seed=0)
    assert np.allclose(draws, Y[:3], atol=1e-5)


def test_simulation_deterministic():
    model, _, _ = toy_model()
    Q = np.random.default_rng(2).random((20, 2))
    assert np.array_equal(model.simulate(Q, 7, 11), model.simulate(Q, 7, 11))


def test_simulation_cap():
    model, _, _ = toy_model()
    with pytest.raises(ValueError):
        model.simulate(np.zeros((gp.SIMULATION_CAP + 1, 2)), 1, 0)


def test_empirical_covariance_matches():
    model, _, _ = toy_model()
    Q = np.array([[0.2, 0.2], [0.25, 0.3], [0.8, 0.6]])
    G = model.predict(Q, want_cov=True).cross_cov
    S = model.simulate(Q, 10_000, 5)
    emp = np.cov(S, rowvar=False)
    # standard error of a sample covariance entry: sqrt((G_ii G_jj + G_ij^2) / n)
    se = np.sqrt((np.outer(np.diag(G), np.diag(G)) + G ** 2) / 10_000)
    assert np.all(np.abs(emp - G) <= 5 * se + 1e-12)


def test_mle_beats_random_hyperparameters():
    model, X, Y = toy_model(n=12)
    best = gp.profile_log_likelihood(X, Y, "matern52", model.kernel.lengthscales)
    rng = np.random.default_rng(0)
    lo, hi = np.log(gp.LENGTHSCALE_BOUNDS)
    for _ in range(20):
        ls = np.exp(rng.uniform(lo, hi, 2))
        assert best >= gp.profile_log_likelihood(X, Y, "matern52", ls) - 1e-8


def test_constant_outputs_give_defined_model():
    X = np.random.default_rng(0).random((6, 2))
    model = gp.fit(X, np.full(6, 3.0))
    post = model.predict([[0.5, 0.5]])
    assert post.mean[0] == pytest.approx(3.0)
    assert np.isfinite(post.sd[0])


def test_condition_on_keeps_hyperparameters():
    model, _, _ = toy_model()
    new = model.condition_on([[0.5, 0.5]], [1.0])
    assert new.n == model.n + 1
    assert np.array_equal(new.kernel.lengthscales, model.kernel.lengthscales)
    assert new.predict([[0.5, 0.5]]).mean[0] == pytest.approx(1.0, abs=1e-6)


def test_predict_gradient_finite_differences():
    model, _, _ = toy_model()
    x = np.array([0.37, 0.61])
    mean, sd, dmean, dsd = gp.predict_gradient(model, x)
    h = 1e-6
    for i in range(2):
        e = np.zeros(2)
        e[i] = h
        up, dn = model.predict(x + e), model.predict(x - e)
        assert dmean[i] == pytest.approx((up.mean[0] - dn.mean[0]) / (2 * h), rel=1e-5, abs=1e-7)
        assert dsd[i] == pytest.approx((up.sd[0] - dn.sd[0]) / (2 * h), rel=1e-5, abs=1e-7)
    post = model.predict(x)
    assert mean == pytest.approx(post.mean[0])
    assert sd == pytest.approx(post.sd[0])


@given(st.lists(st.floats(0, 1), min_size=1, max_size=5))
def test_variance_sandwich(xs):
    model = gp.fit(X5, Y5, lengthscales=0.2)
    sd = model.predict(np.array(xs)[:, None]).sd
    bound = model.kernel.variance * (1 + 1 / (model.kernel.variance * model.mean_precision))
    assert np.all(sd ** 2 >= 0)
    assert np.all(sd ** 2 <= bound + 1e-8)


@given(st.integers(0, 10_000))
def test_interpolation_property(seed):
    rng = np.random.default_rng(seed)
    X = rng.random((6, 2))
    Y = rng.normal(size=6)
    model = gp.fit(X, Y, lengthscales=rng.uniform(0.1, 0.5, 2), variance=1.0)
    assert np.allclose(model.predict(X).mean, Y, atol=1e-6)
