"""SCBO on a small constrained problem.

Minimize the distance to a corner of the unit square while staying in a
disc of radius 0.3 about its centre. The optimum lies on the disc edge.
"""

import numpy as np

from swimopt import scbo

target = np.array([0.9, 0.9])


def problem(x):
    f = float(np.sum((x - target) ** 2))
    c = float(np.linalg.norm(x - 0.5) - 0.3)
    return f, [c]


cfg = scbo.SCBOConfig(dim=2, budget=120)
result = scbo.run(scbo.Problem(2, problem, 1), cfg, seed=0)
best = result.best
f_star = (np.linalg.norm(target - 0.5) - 0.3) ** 2
print(f"best x = {best.x.round(4)}, f = {best.objective:.5f} (optimum {f_star:.5f})")
print(f"constraint {best.constraints[0]:+.2e}, restarts {result.n_restarts}")
