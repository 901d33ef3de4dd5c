"""
Exterior data and the nonlocal DN map
=====================================

Solve the exterior problem for a source on the region and data on the
window, then assemble the DN matrix on the window.  Subtracting the
zero-input measurement removes the source entirely.
"""

import numpy as np

from fracdn import ExteriorSolver, build_grid, build_regions, homogenized_dn, nonlocal_dn_matrix
from fracdn import Conductivity, assemble_operator, spectral_decompose

grid = build_grid(1, 1.0, 31)
regions = build_regions(grid, [-0.25, -0.05], [0.05, 0.8])
S = spectral_decompose(assemble_operator(grid, Conductivity(np.ones(grid.n_nodes)), regions), grid)
s = 0.5

Lam = nonlocal_dn_matrix(S, s, regions)
print("DN matrix size", Lam.shape, "asymmetry", np.abs(Lam - Lam.T).max() / np.abs(Lam).max())

rng = np.random.default_rng(0)
solver = ExteriorSolver(S, s, regions)
f = rng.standard_normal(regions.idx_w.size)
outs = [homogenized_dn(S, s, regions, rng.standard_normal(regions.idx_omega.size), f, solver).g for _ in range(3)]
print("spread of homogenised outputs over three random sources:", np.ptp(outs, axis=0).max())
