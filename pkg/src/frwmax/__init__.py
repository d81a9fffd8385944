"""Closed-form wave propagators on flat and hyperbolic FRW backgrounds.

The electromagnetic potential components in Coulomb gauge satisfy scalar
wave equations in conformal time on the static spatial geometry; this
package evaluates their spherical-means solution operators, including the
Cauchy problem posed on the singular (big-bang) slice, and verifies decay
rates, sharp Huygens support, and continuity through the singularity
against an independent finite-difference solver.
"""

from .geometry import (
    Curvature,
    SpatialPoint,
    SphereQuadrature,
    build_sphere_quadrature,
    flat_point,
    geodesic_distance,
    geodesic_point,
    hyperbolic_point,
    radial_derivative,
)
from .timeframe import ConformalTime, scale_factor, t_to_tau, tau_to_t
from .fields import DataNorms, VectorField, data_norms, make_bump, max_divergence, zero_field
from .propagator import (
    CauchyProblem,
    SolutionSample,
    SpacetimePoint,
    limit_at_singularity,
    propagate,
    richardson_limit,
    solve_batch,
    solve_flat,
    solve_from_singularity,
    solve_hyperbolic,
    spherical_mean,
)
from .oracle import (
    GridSpec,
    GridState,
    compare_flat_oracle,
    fd_step,
    identify_hyperbolic_pde,
    initial_state,
    leapfrog_energy,
    make_grid_spec,
    run_simulation,
)
from .analysis import (
    CrossSingularityTrace,
    DecayFit,
    SingularLimitReport,
    SupportMap,
    cross_singularity_trace,
    fit_decay,
    huygens_map,
    peak_amplitudes,
    singular_limit_report,
    support_probes,
)

__version__ = "0.1.0"

__all__ = [
    "CauchyProblem",
    "ConformalTime",
    "CrossSingularityTrace",
    "Curvature",
    "DataNorms",
    "DecayFit",
    "GridSpec",
    "GridState",
    "SingularLimitReport",
    "SolutionSample",
    "SpacetimePoint",
    "SpatialPoint",
    "SphereQuadrature",
    "SupportMap",
    "VectorField",
    "build_sphere_quadrature",
    "compare_flat_oracle",
    "cross_singularity_trace",
    "data_norms",
    "fd_step",
    "fit_decay",
    "flat_point",
    "geodesic_distance",
    "geodesic_point",
    "huygens_map",
    "hyperbolic_point",
    "identify_hyperbolic_pde",
    "initial_state",
    "leapfrog_energy",
    "limit_at_singularity",
    "make_bump",
    "make_grid_spec",
    "max_divergence",
    "peak_amplitudes",
    "propagate",
    "radial_derivative",
    "richardson_limit",
    "run_simulation",
    "scale_factor",
    "singular_limit_report",
    "solve_batch",
    "solve_flat",
    "solve_from_singularity",
    "solve_hyperbolic",
    "spherical_mean",
    "support_probes",
    "t_to_tau",
    "tau_to_t",
    "zero_field",
]
