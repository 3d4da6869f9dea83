import numpy as np
import pytest

from cehi import gp, pareto, planner
from cehi.ensemble import EstimationConfig, estimate_center

SMALL = planner.PlannerConfig(
    n_refs=4, rollout_candidates=200, mc_samples=1000, volume_samples=4000,
    estimation=EstimationConfig(pool_size=2 ** 11, n_candidates=300, n_sim=60),
)


def linear_models(n=12, seed=0):
    """Two objectives on a 2D design space with the linear front f2 = 1 - f1 at x2 = 0."""
    rng = np.random.default_rng(seed)
    X = np.vstack([rng.random((n, 2)), np.c_[np.linspace(0, 1, 6), np.zeros(6)]])
    Y = np.c_[X[:, 0], 1 - X[:, 0] + X[:, 1]]
    return [gp.fit(X, Y[:, j], seed=seed) for j in range(2)], X, Y


def test_candidate_refs():
    assert np.array_equal(planner.candidate_refs([0, 0], [1, 1], 1), [[0, 0], [1, 1]])
    assert np.allclose(planner.candidate_refs([0, 0], [1, 1], 2), [[0, 0], [0.5, 0.5], [1, 1]])
    C, N = np.array([0.2, 0.7]), np.array([1.3, 1.9])
    R = planner.candidate_refs(C, N, 10)
    assert len(R) == 11
    assert np.allclose(pareto.squared_line_distances(R, C, N), 0, atol=1e-12)
    assert len(planner.candidate_refs(C, C, 10)) == 1
    with pytest.raises(ValueError):
        planner.candidate_refs(C, N, 0)


def test_rollout_one_step():
    models, _, Y = linear_models()
    sc = planner.kriging_believer_rollout(models, Y.max(axis=0), 1, seed=0, n_candidates=200, mc_samples=1000)
    assert sc.virtual_designs.shape == (1, 2) and not sc.failed
    assert all(m.n == models[0].n + 1 for m in sc.kb_models)


def test_rollout_mean_invariance_and_variance_shrink():
    models, _, Y = linear_models()
    sc = planner.kriging_believer_rollout(models, Y.max(axis=0), 4, seed=1, n_candidates=200, mc_samples=1000)
    Q = np.random.default_rng(2).random((50, 2))
    for before, after in zip(models, sc.kb_models):
        pb, pa = before.predict(Q), after.predict(Q)
        assert np.max(np.abs(pb.mean - pa.mean)) <= 1e-6
        assert np.all(pa.sd ** 2 <= pb.sd ** 2 + 1e-9)
        sd_virtual = after.predict(sc.virtual_designs).sd
        assert np.all(sd_virtual <= 1e-3 * np.sqrt(after.kernel.variance))
    for j, model in enumerate(sc.kb_models):
        assert np.allclose(model.predict(sc.virtual_designs).mean, sc.virtual_values[:, j], atol=1e-6)


def test_rollout_deterministic():
    models, _, Y = linear_models()
    a = planner.kriging_believer_rollout(models, Y.max(axis=0), 2, seed=5, n_candidates=200, mc_samples=1000)
    b = planner.kriging_believer_rollout(models, Y.max(axis=0), 2, seed=5, n_candidates=200, mc_samples=1000)
    assert np.array_equal(a.virtual_designs, b.virtual_designs)


def test_rollout_rejects_zero_budget():
    models, _, Y = linear_models()
    with pytest.raises(ValueError):
        planner.kriging_believer_rollout(models, Y.max(axis=0), 0)


def _toy_estimate():
    models, _, Y = linear_models()
    est = estimate_center(models, Y, SMALL.estimation, seed=0)
    return models, est


def test_all_pass_returns_nadir():
    models, est = _toy_estimate()
    cfg = planner.PlannerConfig(**{**SMALL.__dict__, "epsilon2": 1.0})
    sel = planner.select_ref(models, est.center_hat, est.nadir_hat, est.ideal_hat, 2, cfg, seed=0)
    assert sel.index == len(sel.candidates) - 1 and not sel.fallback
    assert np.allclose(sel.ref, est.nadir_hat)


def test_none_pass_returns_center_with_flag():
    models, est = _toy_estimate()
    cfg = planner.PlannerConfig(**{**SMALL.__dict__, "epsilon2": 0.0})
    sel = planner.select_ref(models, est.center_hat, est.nadir_hat, est.ideal_hat, 2, cfg, seed=0)
    assert sel.fallback and sel.index == 0 and not sel.error
    assert np.allclose(sel.ref, est.center_hat)


def test_selection_on_segment_and_deterministic():
    models, est = _toy_estimate()
    a = planner.select_ref(models, est.center_hat, est.nadir_hat, est.ideal_hat, 3, SMALL, seed=4)
    b = planner.select_ref(models, est.center_hat, est.nadir_hat, est.ideal_hat, 3, SMALL, seed=4)
    assert np.array_equal(a.ref, b.ref) and np.array_equal(a.uncertainties, b.uncertainties, equal_nan=True)
    assert pareto.squared_line_distances(a.ref[None], est.center_hat, est.nadir_hat)[0] < 1e-12
    assert np.all(np.isnan(a.uncertainties) | ((a.uncertainties >= 0) & (a.uncertainties <= 0.25)))


def test_rollouts_are_independent_of_other_candidates():
    models, est = _toy_estimate()
    sel = planner.select_ref(models, est.center_hat, est.nadir_hat, est.ideal_hat, 2, SMALL, seed=9)
    # the per-candidate seed depends only on the candidate index
    c = len(sel.candidates) - 1
    roll, ens_seed, vol = np.random.SeedSequence(9).spawn(len(sel.candidates))[c].generate_state(3)
    from cehi.ensemble import nd_ensemble
    from cehi.uncertainty import DominationField, volume_uncertainty
    sc = planner.kriging_believer_rollout(models, sel.candidates[c], 2, int(roll), n_candidates=SMALL.rollout_candidates,
                                          n_refine=0, mc_samples=SMALL.mc_samples)
    field = DominationField(nd_ensemble(sc.kb_models, config=SMALL.estimation, seed=int(ens_seed)))
    u = volume_uncertainty(field, est.ideal_hat, sel.candidates[c], SMALL.volume_samples, int(vol))
    assert u == sel.uncertainties[c]


def test_larger_budget_never_narrows_the_reference():
    rng = np.random.default_rng(0)
    X = rng.random((10, 2))
    Y = np.c_[X[:, 0], 1 - np.sqrt(X[:, 0]) + 2 * X[:, 1]]
    models = [gp.fit(X, Y[:, j]) for j in range(2)]
    est = estimate_center(models, Y, SMALL.estimation, seed=0)
    cfg = planner.PlannerConfig(**{**SMALL.__dict__, "epsilon2": 2e-4})
    picks = [planner.select_ref(models, est.center_hat, est.nadir_hat, est.ideal_hat, b, cfg, seed=0).index
             for b in (2, 5, 10)]
    assert picks == sorted(picks)
    assert picks[-1] > picks[0]
