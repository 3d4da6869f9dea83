"""Estimate the Ideal, Nadir and center of ZDT1 from a 20-point design.

The empirical front of a small design is far from the true one. Fronts
simulated from the GP posteriors at importance-sampled designs give medians
for I and N, and the center estimate is the point of the estimated line closest
to those fronts. The true center of ZDT1 is ((3 - sqrt 5) / 2) in both objectives.
"""

import numpy as np

from cehi import pareto
from cehi.driver import fit_models, maximin_lhs
from cehi.ensemble import EstimationConfig, estimate_center
from cehi.problems import zdt1

problem = zdt1(4)
X = maximin_lhs(20, 4, seed=0)
Y = np.array([problem(x) for x in X])
models = fit_models(X, Y, "matern52", seed=0)

empirical = pareto.summarize(Y)
print("empirical ideal", empirical.ideal.round(3), "nadir", empirical.nadir.round(3))

est = estimate_center(models, Y, EstimationConfig(n_sim=200), seed=0)
print("estimated ideal", est.ideal_hat.round(3), "nadir", est.nadir_hat.round(3))
print("estimated center", est.center_hat.round(3), "true", problem.true_center.round(3))
