"""Fractional Dirichlet-to-Neumann maps on grids: forward solvers, the
degenerate-elliptic extension and source/conductivity recovery."""

__version__ = "0.1.0"

from .errors import (
    ConfigurationError,
    DataError,
    FracDNError,
    GeometryError,
    NumericError,
    ParameterError,
)
from .grid import Grid, NodeField, RegionMask, build_grid, build_regions, sample_field
from .operator import (
    Conductivity,
    SpectralOperator,
    assemble_operator,
    dirichlet_form,
    dirichlet_form_kernel,
    fit_kernel_exponent,
    fractional_apply,
    fractional_matrix,
    frechet_fractional,
    heat_apply,
    kernel_entry,
    kernel_matrix,
    make_conductivity,
    spectral_decompose,
)
from .forward import (
    DNDataset,
    DNSample,
    ExteriorSolver,
    gauge_source,
    homogenized_dn,
    local_dn,
    nonlocal_dn,
    nonlocal_dn_matrix,
    solve_exterior,
    solve_local,
)
from .extension import (
    DecayReport,
    ExtensionSolution,
    check_decay,
    d_s_constant,
    extension_profile,
    neumann_trace,
    neumann_trace_limit,
    reduce_to_local,
    solve_extension,
)
from .inversion import (
    GNParams,
    ReconstructionResult,
    gauge_experiment,
    measure,
    recover_conductivity,
    recover_source,
    source_to_data,
    two_step_reconstruct,
    ucp_probe,
)
