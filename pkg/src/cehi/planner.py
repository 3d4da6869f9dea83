"""Choice of the final reference point by anticipating the remaining optimization budget.

Each candidate reference point along ``[C, N]`` is tried in a virtual run: EHI is
maximized ``b`` times, and after each step the models believe their own posterior
mean at the chosen design. The widest candidate whose box ``[I, R]`` is still
resolved (low volume uncertainty) under the virtual posterior wins.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import pareto
from .acquisition import AcquisitionSpec, maximize
from .ensemble import EstimationConfig, nd_ensemble, observed_outputs
from .gp import ConditioningError, GPModel
from .uncertainty import VOLUME_EPSILON, DominationField, volume_uncertainty


@dataclass(frozen=True)
class VirtualScenario:
    ref_candidate: np.ndarray
    kb_models: list = field(repr=False)
    virtual_designs: np.ndarray
    virtual_values: np.ndarray
    failed: bool = False


@dataclass(frozen=True)
class PlannerConfig:
    n_refs: int = 10
    epsilon2: float = VOLUME_EPSILON
    rollout_candidates: int = 500
    rollout_refine: int = 0
    mc_samples: int = 10_000
    volume_samples: int = 100_000
    estimation: EstimationConfig = EstimationConfig()


@dataclass(frozen=True)
class RefSelection:
    ref: np.ndarray
    index: int
    candidates: np.ndarray
    uncertainties: np.ndarray
    fallback: bool
    error: bool = False


def candidate_refs(center_hat, nadir_hat, C: int = 10) -> np.ndarray:
    """``C + 1`` points evenly spread from the center to the Nadir, both included."""
    if C < 1:
        raise ValueError("C must be at least 1")
    c = np.asarray(center_hat, float)
    n = np.asarray(nadir_hat, float)
    if np.linalg.norm(n - c) <= pareto.LINE_TOL:
        return c[None, :].copy()
    t = np.arange(C + 1)[:, None] / C
    return c + t * (n - c)


def kriging_believer_rollout(models: list[GPModel], ref, b: int, seed=0, *, n_candidates: int = 500,
                             n_refine: int = 1, mc_samples: int = 10_000) -> VirtualScenario:
    """Run ``b`` virtual EHI iterations, augmenting the models with their own predictions."""
    if b < 1:
        raise ValueError("b must be at least 1")
    ref = np.asarray(ref, float)
    spec = AcquisitionSpec("ehi", ref, mc_samples)
    front = pareto.pareto_front(observed_outputs(models))
    seeds = np.random.SeedSequence(seed).generate_state(b)
    kb = list(models)
    designs, values = [], []
    failed = False
    for i in range(b):
        res = maximize(spec, kb, front, seed=int(seeds[i]), n_candidates=n_candidates, n_refine=n_refine)
        x = res.x
        y = np.array([float(mdl.predict(x[None, :]).mean[0]) for mdl in kb])
        try:
            kb = [mdl.condition_on(x[None, :], [yj]) for mdl, yj in zip(kb, y)]
        except ConditioningError:
            failed = True
            break
        designs.append(x)
        values.append(y)
        front = pareto.pareto_front(np.vstack([front, y]))
    d, m = models[0].dim, len(models)
    return VirtualScenario(
        ref,
        kb,
        np.array(designs).reshape(-1, d),
        np.array(values).reshape(-1, m),
        failed,
    )


def select_ref(models: list[GPModel], center_hat, nadir_hat, ideal_hat, b: int,
               config: PlannerConfig = PlannerConfig(), seed=0) -> RefSelection:
    """Largest-index candidate whose virtual volume uncertainty is below ``epsilon2``.

    Falls back to the center (index 0) with ``fallback`` set when no candidate
    qualifies, and additionally sets ``error`` when every rollout failed.
    """
    if b < 1:
        raise ValueError("b must be at least 1")
    refs = candidate_refs(center_hat, nadir_hat, config.n_refs)
    ideal = np.asarray(ideal_hat, float)
    cand_seeds = np.random.SeedSequence(seed).spawn(len(refs))
    unc = np.full(len(refs), np.nan)
    n_failed = 0
    for c, (ref, ss) in enumerate(zip(refs, cand_seeds)):
        roll_seed, ens_seed, vol_seed = ss.generate_state(3)
        scenario = kriging_believer_rollout(models, ref, b, int(roll_seed), n_candidates=config.rollout_candidates,
                                            n_refine=config.rollout_refine, mc_samples=config.mc_samples)
        if scenario.failed and len(scenario.virtual_designs) == 0:
            n_failed += 1
            continue
        if not np.all(ref > ideal):
            continue
        ens = nd_ensemble(scenario.kb_models, config=config.estimation, seed=int(ens_seed))
        unc[c] = volume_uncertainty(DominationField(ens), ideal, ref, config.volume_samples, int(vol_seed))
    ok = np.flatnonzero(unc < config.epsilon2)
    if ok.size:
        c_star = int(ok.max())
        return RefSelection(refs[c_star], c_star, refs, unc, False)
    return RefSelection(refs[0], 0, refs, unc, True, n_failed == len(refs))
