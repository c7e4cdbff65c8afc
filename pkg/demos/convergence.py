"""Watch the normalised flow round off an irregular convex body.

The distance from the limit section falls like e^{-4t}: the slowest
non-trivial mode is degree two, whose decay rate relative to the
inflation is l(l+1) - 2 = 4.
"""

import numpy as np

from mrcf import flow_engine as fe
from mrcf import line_space as ls
from mrcf import sphere_harmonics as sh

grid = sh.make_grid(16)
th, ph = grid.theta, grid.phi
r0 = ls.SupportField.from_values(
    grid,
    1 + 0.3 * np.sin(th) * np.cos(ph) + 0.05 * (3 * np.cos(th) ** 2 - 1)
    + 0.02 * np.sin(th) ** 3 * np.cos(3 * ph),
)
report = fe.convergence_report(r0, None, np.linspace(0.5, 2.0, 7))
for row in report.rows():
    print("  ".join(f"{k}={v:.4g}" for k, v in row.items()))
print("fitted C0 exponent:", round(report.decay_exponent, 3))
print("fitted C2 exponent:", round(report.c2_exponent, 3))
