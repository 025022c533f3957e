"""Covariance estimation with cross-validated tuning for minimum-variance portfolios."""

from .backtest import BacktestConfig, BacktestResult, StrategySpec, drift_weights, run_backtest
from .cross_validation import (
    CvResult,
    FoldArithmeticError,
    FoldScheme,
    SelectionCriterion,
    cv_select,
    make_folds,
    realized_covariance,
    sfe,
)
from .data import DataError, PricePanel, ReturnsPanel, load_csv, to_returns, window, write_csv
from .estimators import *  # noqa: F401,F403
from .estimators import __all__ as _est_all
from .linalg import LinAlgFailure, NotPositiveDefinite
from .portfolio import (
    PortfolioWeights,
    QPIterationLimit,
    equal_weights,
    gmv_noshort_weights,
    gmv_weights,
    noshort_kkt_residual,
    portfolio_returns,
)
from .stats import (
    PerformanceSummary,
    VarianceTestResult,
    annualized_sd,
    avg_turnover,
    hac_variance_test,
    msfe,
)

__version__ = "0.1.0"

__all__ = [
    "BacktestConfig",
    "BacktestResult",
    "CvResult",
    "DataError",
    "FoldArithmeticError",
    "FoldScheme",
    "LinAlgFailure",
    "NotPositiveDefinite",
    "PerformanceSummary",
    "PortfolioWeights",
    "PricePanel",
    "QPIterationLimit",
    "ReturnsPanel",
    "SelectionCriterion",
    "StrategySpec",
    "VarianceTestResult",
    "annualized_sd",
    "avg_turnover",
    "cv_select",
    "drift_weights",
    "equal_weights",
    "gmv_noshort_weights",
    "gmv_weights",
    "hac_variance_test",
    "load_csv",
    "make_folds",
    "msfe",
    "noshort_kkt_residual",
    "portfolio_returns",
    "realized_covariance",
    "run_backtest",
    "sfe",
    "to_returns",
    "window",
    "write_csv",
    *_est_all,
]
