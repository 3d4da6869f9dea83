"""mEI and EHI on a toy bi-objective problem.

When the reference point is not dominated by the current front, EHI reduces to
the product of the per-objective expected improvements, which is much cheaper
and has an analytic gradient. Once R is dominated the two differ.
"""

import numpy as np

from cehi import acquisition as acq
from cehi.driver import fit_models

np.set_printoptions(precision=4)

rng = np.random.default_rng(0)
X = rng.random((12, 2))
Y = np.c_[X[:, 0], 1 - np.sqrt(X[:, 0]) + X[:, 1]]
models = fit_models(X, Y, "matern52", seed=0)

Q = np.c_[np.linspace(0.8, 1.0, 5), np.zeros(5)]  # along the true Pareto set
posts = [m.predict(Q) for m in models]
means = np.column_stack([p.mean for p in posts])
sds = np.column_stack([p.sd for p in posts])

nd_ref = np.array([1.0, Y[:, 1].min() - 0.01])  # no observation dominates it
for ref in (nd_ref, Y.max(axis=0)):
    print("R =", ref.round(3), "dominated" if np.any(np.all(Y <= ref, axis=1)) else "not dominated")
    print("  mEI", acq.mei(means, sds, ref))
    print("  EHI", acq.ehi_from_posterior(means, sds, Y, ref))

g, ok = acq.mei_gradient(models, Q[0], Y.max(axis=0))
print("mEI gradient at", Q[0].round(3), g, "(ok)" if ok else "(unavailable)")

spec = acq.AcquisitionSpec("mei", Y.max(axis=0))
best = acq.maximize(spec, models, Y, seed=0)
print("maximizer", best.x.round(3), "value", round(best.value, 5))
