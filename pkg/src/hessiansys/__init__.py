"""Toolkit for fully nonlinear second-order elliptic Hessian systems.

Dense tensor algebra for fourth-order coefficient tensors, structural
decompositions with closed-form ellipticity constants, finite-difference
Dirichlet solvers, a nearness fixed-point iteration for the nonlinear
problem, sample-based ellipticity certification, and numerical
verification of the Miranda-Talenti identity on smooth convex domains.
"""

__version__ = "0.1.0"

from .tensors import (
    Dims,
    SymTensor4,
    HessianValue,
    EllipticityResult,
    contract_hess,
    rank_one_form,
    ellipticity_constant,
    is_rank_one_positive,
    frobenius,
    frobenius4,
    identity_tensor,
    monotone_tensor,
)
from .sh import (
    SHDecomposition,
    SHReport,
    assemble,
    verify_sh,
    rescale_common_lambda,
    nu_from_sh,
    range_projections,
    min_range_quadratic_identity,
)
from .grid import BoxDomain, DiscreteField, discrete_hessian, discrete_norms
from .linear import DirichletSolver, LinearSolveReport, assemble_operator, solve_dirichlet
from .nonlinear import (
    NonlinearOperator,
    SolverConfig,
    IterationReport,
    campanato_iterate,
    homogenize_bc,
    comparison_check,
    stability_solve,
    estimate_nu_F,
)
from .conditions import (
    SampleCloud,
    ConditionReport,
    check_k_condition,
    check_def1,
    check_campanato_tarsia,
    fit_beta_gamma,
    nu_FG,
)
from .mt import (
    SmoothDomain2D,
    TestFunction,
    MTIdentityReport,
    mean_curvature_signed,
    mt_identity,
    lambda_sandwich_inequality,
    pullback_checks,
    generalized_mt_inequality,
)
from . import catalog
