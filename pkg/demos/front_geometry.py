"""Ideal, Nadir and center of a small 3-objective front, and why scaling matters.

The closest point to the Ideal-Nadir line is not invariant to rescaling an
objective when m = 3: stretching f1 and f2 by 3 moves the center to another point.
"""

import numpy as np

from cehi import pareto

P = np.array([[1, 0, 0], [0, 1, 0], [0, 0, 1], [0.5, 0.5, 0.6], [0.5, 0.55, 0.5]])

s = pareto.summarize(P)
print("ideal", s.ideal, "nadir", s.nadir)
print("squared distances to the line", pareto.squared_line_distances(P, s.ideal, s.nadir))
print("closest point", P[s.closest_index], "-> center", s.center)

scaled = pareto.summarize(P * [3.0, 3.0, 1.0])
print("after diag(3, 3, 1) the closest point is #%d" % (scaled.closest_index + 1))

# hypervolume of the front, exact and by Monte-Carlo
ref = np.ones(3) * 1.1
hv_mc, se = pareto.hypervolume_mc(s.front, ref, 200_000, seed=0)
print(f"hypervolume {pareto.hypervolume(s.front, ref):.4f} (MC {hv_mc:.4f} +- {se:.4f})")
