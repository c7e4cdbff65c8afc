"""The scalar flow (d/dt - Lap) f = 2f either settles or blows up.

Only the degree-one modes are neutral. With zero mean the rest decays and
f tends to a degree-one eigenfunction; any nonzero mean grows like e^t from
below once the other modes have died out.
"""

import numpy as np

from mrcf import flow_engine as fe
from mrcf import sphere_harmonics as sh

grid = sh.make_grid(16)
th, ph = grid.theta, grid.phi
for label, values in (
    ("zero mean", 0.4 * np.cos(th) + 0.2 * (3 * np.cos(th) ** 2 - 1)),
    ("mean 0.1", 0.1 + 0.4 * np.cos(th) + 0.2 * (3 * np.cos(th) ** 2 - 1)),
):
    result = fe.area_dichotomy(sh.ScalarField(grid, values))
    print(f"{label:10s} -> {result.outcome.name}, constant={result.constant}")
