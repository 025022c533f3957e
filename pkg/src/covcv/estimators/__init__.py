"""Covariance and precision matrix estimators."""

from .base import METHODS, CovarianceEstimate
from .families import FAMILIES, GridSettings, get_family
from .glasso import (
    GlassoConvergenceError,
    PrecisionEstimate,
    glasso,
    glasso_bic,
    glasso_path,
    glasso_rho_grid,
)
from .nonlinear import DEFAULT_SPEED, nonlinear_shrinkage, nonlinear_shrinkage_path
from .poet import poet, poet_num_factors, poet_soft_threshold
from .shrinkage import (
    ShrinkageTarget,
    analytic_intensity_cc,
    analytic_intensity_identity,
    build_target,
    linear_shrink,
    linear_shrink_path,
    sample_covariance,
)

__all__ = [
    "DEFAULT_SPEED",
    "FAMILIES",
    "METHODS",
    "CovarianceEstimate",
    "GlassoConvergenceError",
    "GridSettings",
    "PrecisionEstimate",
    "ShrinkageTarget",
    "analytic_intensity_cc",
    "analytic_intensity_identity",
    "build_target",
    "get_family",
    "glasso",
    "glasso_bic",
    "glasso_path",
    "glasso_rho_grid",
    "linear_shrink",
    "linear_shrink_path",
    "nonlinear_shrinkage",
    "nonlinear_shrinkage_path",
    "poet",
    "poet_num_factors",
    "poet_soft_threshold",
    "sample_covariance",
]
