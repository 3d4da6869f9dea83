"""Domination uncertainty along the Ideal-Nadir line.

p(y) is the fraction of simulated fronts dominating y. Averaging p (1 - p)
over 100 points of the line gives U; the search has converged to the center
once U drops below 1e-4. A single front crossing at one grid cell (1 of 100
fronts lagging by one step) sits just under that threshold.
"""

import numpy as np

from cehi.uncertainty import DominationField, line_uncertainty

T = np.linspace(0, 1, 100)
line = (np.zeros(2), np.ones(2))

sharp = DominationField([np.array([T[40] * np.ones(2)])] + [np.array([T[41] * np.ones(2)])] * 99)
print("one lagging front:", line_uncertainty(sharp, line))

rng = np.random.default_rng(0)
t = np.linspace(0, 1.5, 300)
for spread in (0.2, 0.05, 0.005):
    fronts = [np.c_[t, c - t] for c in rng.normal(1.0, spread, 100)]
    print(f"linear fronts with offset sd {spread}: U = {line_uncertainty(DominationField(fronts), line):.2e}")
