"""Fractional Brownian motion transforms, Girsanov reweighting, and locally
interacting SDE systems on graphs.

The layering, bottom to top: closed-form special functions and quadrature
(`special`), deterministic counter-based sampling (`rng`), Volterra kernels
and their covariance identities (`kernels`), the discrete fundamental
martingale (`fundamental`), simulated path ensembles and kernel transforms
(`paths`), importance weights (`girsanov`), locally finite graphs
(`graphs`), interacting systems with conditional-independence and entropy
diagnostics (`systems`), and the numbered end-to-end checks (`acceptance`).
"""

from .errors import (
    BoundarySingularityError,
    FracSdeError,
    KernelDegenerateError,
    QuadFailureError,
)
from .fundamental import (
    build_covariance,
    fundamental_weights,
    gershgorin_margin,
    recursive_inverse,
)
from .girsanov import (
    ConstantDrift,
    LinearDrift,
    BoundedTanhDrift,
    NeighborLinearDrift,
    girsanov_log_weight,
    importance_expectation,
    novikov_partition,
    parse_drift,
    weight_mean_check,
)
from .graphs import (
    LocallyFiniteGraph,
    boundary,
    boundary2,
    integer_line,
    parse_graph,
    truncate,
    two_cliques,
)
from .kernels import (
    KernelSpec,
    QuadratureSpec,
    covariance_R,
    fbm_spec,
    isometry_residual,
    kernel_K,
    kernel_L,
    mishura_spec,
    normalization_constant,
)
from .paths import (
    DiscretizedKernel,
    PathEnsemble,
    TimeGrid,
    covariance_gap,
    discretize_kernel,
    drift_q_transform,
    ensemble_from_binary,
    ensemble_to_binary,
    ensemble_to_csv,
    fundamental_transform,
    sample_bm,
    volterra_paths,
)
from .systems import (
    InitialLaw,
    conditional_independence_test,
    driftless_system,
    entropy_estimate,
    parse_initial,
    simulate_system_euler,
    system_log_weights,
    truncation_convergence,
    uniform_drifts,
)

__version__ = "0.1.0"

__all__ = [
    "BoundarySingularityError",
    "BoundedTanhDrift",
    "ConstantDrift",
    "DiscretizedKernel",
    "FracSdeError",
    "InitialLaw",
    "KernelDegenerateError",
    "KernelSpec",
    "LinearDrift",
    "LocallyFiniteGraph",
    "NeighborLinearDrift",
    "PathEnsemble",
    "QuadFailureError",
    "QuadratureSpec",
    "TimeGrid",
    "boundary",
    "boundary2",
    "build_covariance",
    "conditional_independence_test",
    "covariance_R",
    "covariance_gap",
    "discretize_kernel",
    "drift_q_transform",
    "driftless_system",
    "ensemble_from_binary",
    "ensemble_to_binary",
    "ensemble_to_csv",
    "entropy_estimate",
    "fbm_spec",
    "fundamental_transform",
    "fundamental_weights",
    "gershgorin_margin",
    "girsanov_log_weight",
    "importance_expectation",
    "integer_line",
    "isometry_residual",
    "kernel_K",
    "kernel_L",
    "mishura_spec",
    "normalization_constant",
    "novikov_partition",
    "parse_drift",
    "parse_graph",
    "parse_initial",
    "recursive_inverse",
    "sample_bm",
    "simulate_system_euler",
    "system_log_weights",
    "truncate",
    "truncation_convergence",
    "two_cliques",
    "uniform_drifts",
    "volterra_paths",
    "weight_mean_check",
    "__version__",
]
