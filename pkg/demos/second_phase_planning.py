"""Choose how far from the center the second phase can aim.

Each candidate reference point on the center-Nadir segment is tested by a
Kriging Believer rollout of the remaining budget. The farthest candidate whose
virtual posterior leaves little domination uncertainty in its box wins, so a
larger remaining budget reaches farther toward the Nadir.
"""

import numpy as np

from cehi import planner
from cehi.driver import fit_models, maximin_lhs
from cehi.ensemble import EstimationConfig, estimate_center
from cehi.problems import get_problem

problem = get_problem("concave_arc")
X = maximin_lhs(8, 2, seed=0)
Y = np.array([problem(x) for x in X])
models = fit_models(X, Y, "matern52", seed=0)
est = estimate_center(models, Y, EstimationConfig(pool_size=2 ** 12, n_candidates=400, n_sim=100), seed=0)

cfg = planner.PlannerConfig(n_refs=5, rollout_candidates=200, mc_samples=1000, volume_samples=5000,
                            estimation=EstimationConfig(pool_size=2 ** 11, n_candidates=300, n_sim=60))
for b in (2, 8):
    sel = planner.select_ref(models, est.center_hat, est.nadir_hat, est.ideal_hat, b, cfg, seed=0)
    print(f"b = {b}: R* = {sel.ref.round(3)} (candidate {sel.index} of 0..{len(sel.candidates) - 1})")
    print("  U per candidate", np.round(sel.uncertainties, 5))
