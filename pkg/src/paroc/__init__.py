"""paroc: Pareto-front tracing and KKT verification for optimal control.

Library layout mirrors the pipeline: :mod:`paroc.problems` declares the
built-in models, :mod:`paroc.integrate` the fixed-step integrators,
:mod:`paroc.cq` the constraint-qualification checks, :mod:`paroc.kkt`
the multiplier reconstruction and verification, :mod:`paroc.solve` the
scalarized solver and sweep driver, and :mod:`paroc.cli` the command
line front end.
"""

from .model import (
    DerivativeReport,
    EndpointMap,
    Grid,
    MultiplierSet,
    Problem,
    StageMap,
    Trajectory,
    check_derivatives,
)
from .problems import ParamSpec, get_problem, param_specs, problem_names
from .integrate import (
    Gramian,
    PrincipalMatrix,
    apply_reachability,
    controllability_gramian,
    integrate_adjoint,
    integrate_state,
    integrate_with_cost,
    objective_values,
    principal_matrix,
    state_midpoints,
)
from .cq import (
    CQReport,
    H4PrimeCertificate,
    build_AB,
    build_R,
    check_h2,
    check_h3,
    check_h4prime,
    check_h5,
    evaluate_cqs,
    nullspace_basis,
)
from .kkt import (
    CriticalDirection,
    DiscreteKKTReport,
    KKTReport,
    KKTTolerances,
    SSCReport,
    check_discrete_vop_kkt,
    check_ssc,
    extract_theta,
    reconstruct_multipliers,
    sample_critical_directions,
    second_order_form,
    verify_kkt,
)
from .solve import (
    ParetoPoint,
    SolveOptions,
    SolveResult,
    SweepResult,
    TranscribedNLP,
    dominance_filter,
    pareto_sweep,
    simplex_weights,
    solve_scalarized,
)
from .errors import (
    IntegrationError,
    ParameterError,
    ParocError,
    SingularMatrixError,
    StructureError,
    UnknownProblemError,
)

__version__ = "0.1.0"

__all__ = [
    "DerivativeReport", "EndpointMap", "Grid", "MultiplierSet", "Problem",
    "StageMap", "Trajectory", "check_derivatives",
    "ParamSpec", "get_problem", "param_specs", "problem_names",
    "Gramian", "PrincipalMatrix", "apply_reachability", "controllability_gramian",
    "integrate_adjoint", "integrate_state", "integrate_with_cost",
    "objective_values", "principal_matrix", "state_midpoints",
    "CQReport", "H4PrimeCertificate", "build_AB", "build_R", "check_h2",
    "check_h3", "check_h4prime", "check_h5", "evaluate_cqs", "nullspace_basis",
    "CriticalDirection", "DiscreteKKTReport", "KKTReport", "KKTTolerances",
    "SSCReport", "check_discrete_vop_kkt", "check_ssc", "extract_theta",
    "reconstruct_multipliers", "sample_critical_directions", "second_order_form",
    "verify_kkt",
    "ParetoPoint", "SolveOptions", "SolveResult", "SweepResult", "TranscribedNLP",
    "dominance_filter", "pareto_sweep", "simplex_weights", "solve_scalarized",
    "IntegrationError", "ParameterError", "ParocError", "SingularMatrixError",
    "StructureError", "UnknownProblemError",
    "__version__",
]
