"""Projected-gradient and thresholding solvers for l1 - l2 sparsity regularization."""

from .core import (
    ConfigurationError,
    ContractViolation,
    DenseOperator,
    IterationTrace,
    Objective,
    ProblemInstance,
    SolveOutcome,
    SolverConfig,
    Termination,
    apply,
    apply_adjoint,
    load_problem,
    operator_norm_sq,
    rescale_problem,
    save_problem,
)
from .diagnostics import (
    AssumptionReport,
    check_assumptions,
    eval_surrogate,
    max_eig_norm_hessian,
    relative_error,
)
from .estimators import ISTARegressor, PGGCGMRegressor, PGSFRegressor, STL1L2Regressor
from .problems import BlurSpec, CsSpec, add_awgn, generate_blur, generate_cs
from .prox import find_threshold_for_radius, project_l1_ball, soft_threshold, threshold_l1_norm
from .selection import (
    DiscrepancyBand,
    DiscrepancyNotReached,
    RadiusSearchResult,
    discrepancy,
    search_alpha,
    search_radius,
)
from .solvers import (
    eval_D,
    eval_J,
    line_search,
    solve,
    solve_ista,
    solve_pg_gcgm,
    solve_pg_sf,
    solve_st_l1l2,
    stationarity_residual,
    zero_iterate_fallback,
)

__version__ = "0.1.0"
