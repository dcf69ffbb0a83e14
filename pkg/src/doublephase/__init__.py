"""Double-phase Poisson problems: modular geometry, convexity certificates, solver."""

__version__ = "0.1.0"

from .mesh import (
    BoundaryMask,
    Grid,
    GradientField,
    ScalarField,
    apply_dirichlet,
    boundary_mask,
    build_grid,
    discrete_gradient,
    integrate_cells,
    node_to_cell,
)
from .exprparse import EvalError, Expr, ParseError, eval_at, parse, pretty, sample
from .phase import (
    ExponentSummary,
    PhasePair,
    PhaseStructure,
    eval_H,
    exponent_summary,
    growth_envelope_check,
    matuszewska_index,
)
from .modular import (
    ModularReport,
    dual_pairing_bound_check,
    estimate_dual_bound,
    l2_pairing,
    luxemburg_norm,
    norm_modular_sandwich,
    overline_equivalence_check,
    poincare_ratio,
    rho,
)
from .convexity import (
    ConvexityReport,
    PairSplit,
    RegimePartition,
    delta_of_epsilon,
    monotonicity_lower_bound_check,
    pair_split,
    partition,
    scalar_lower_bound_check,
    two_point_inequality_check,
    verify_multiphase_uc,
    verify_uc_pair,
)
from .solver import (
    LineSearchError,
    Problem,
    Solution,
    SolverError,
    SolverOptions,
    energy,
    energy_gradient,
    lower_bound,
    minimize,
    solve_weak,
    uniqueness_certificate,
    weak_residual,
)

__all__ = [
    "BoundaryMask",
    "ConvexityReport",
    "EvalError",
    "ExponentSummary",
    "Expr",
    "GradientField",
    "Grid",
    "LineSearchError",
    "ModularReport",
    "PairSplit",
    "ParseError",
    "PhasePair",
    "PhaseStructure",
    "Problem",
    "RegimePartition",
    "ScalarField",
    "Solution",
    "SolverError",
    "SolverOptions",
    "apply_dirichlet",
    "boundary_mask",
    "build_grid",
    "delta_of_epsilon",
    "discrete_gradient",
    "dual_pairing_bound_check",
    "energy",
    "energy_gradient",
    "estimate_dual_bound",
    "eval_H",
    "eval_at",
    "exponent_summary",
    "growth_envelope_check",
    "integrate_cells",
    "l2_pairing",
    "lower_bound",
    "luxemburg_norm",
    "matuszewska_index",
    "minimize",
    "monotonicity_lower_bound_check",
    "node_to_cell",
    "norm_modular_sandwich",
    "overline_equivalence_check",
    "pair_split",
    "parse",
    "partition",
    "poincare_ratio",
    "pretty",
    "rho",
    "sample",
    "scalar_lower_bound_check",
    "solve_weak",
    "two_point_inequality_check",
    "uniqueness_certificate",
    "verify_multiphase_uc",
    "verify_uc_pair",
    "weak_residual",
]
