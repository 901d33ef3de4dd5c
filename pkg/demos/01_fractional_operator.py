"""
Three ways to build a fractional power
======================================

The fractional power of the conductivity operator can be formed from its
eigendecomposition, from the heat semigroup through the jump kernel, or
from the weighted Neumann trace of the degenerate extension.  This script
builds all three on a 1D grid and prints how far apart they are.
"""

import numpy as np

from fracdn import (
    Conductivity,
    assemble_operator,
    build_grid,
    build_regions,
    d_s_constant,
    fractional_matrix,
    kernel_matrix,
    neumann_trace_limit,
    solve_extension,
    spectral_decompose,
)
from fracdn.operator import fit_kernel_exponent

grid = build_grid(1, 1.0, 63)
regions = build_regions(grid, [-0.3, -0.15], [0.1, 0.8])

# conductivity: a 30% bump on the region, one everywhere else
sigma = np.ones(grid.n_nodes)
x = grid.coords[regions.idx_omega, 0]
sigma[regions.idx_omega] = 1 + 0.3 * np.exp(-((x + 0.22) / 0.1) ** 2)
S = spectral_decompose(assemble_operator(grid, Conductivity(sigma), regions), grid)

iu = np.triu_indices(S.n, 1)
print(f"{'s':>5} {'spectral-quad':>14} {'spectral-ext':>14} {'slope':>8} {'-(n+2s)':>8}")
for s in (0.25, 0.5, 0.75):
    spectral = fractional_matrix(S, s)[iu]
    quadrature = -kernel_matrix(S, s)[iu]
    trace, _ = neumann_trace_limit(solve_extension(S, s, np.eye(S.n)))
    extension = (trace / d_s_constant(s))[iu]
    dq = np.max(np.abs(spectral - quadrature) / np.abs(spectral))
    de = np.max(np.abs(spectral - extension) / np.abs(spectral))
    slope, ref = fit_kernel_exponent(S, s)
    print(f"{s:5.2f} {dq:14.2e} {de:14.2e} {slope:8.3f} {ref:8.2f}")
