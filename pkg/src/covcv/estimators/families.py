"""Uniform interface over the estimators for tuning and backtesting.

A family maps a return matrix and one free parameter to a covariance
estimate, knows its default parameter grid, and knows how the parameter is
set when no cross-validation is done ("original" rule).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..linalg import LinAlgFailure
from .base import CovarianceEstimate
from .glasso import glasso_bic, glasso_path, glasso_rho_grid
from .nonlinear import DEFAULT_SPEED, nonlinear_shrinkage_path
from .poet import poet, poet_num_factors
from .shrinkage import (
    analytic_intensity_cc,
    analytic_intensity_identity,
    build_target,
    linear_shrink,
    linear_shrink_path,
    sample_covariance,
)

__all__ = ["FAMILIES", "GridSettings", "get_family"]


@dataclass(frozen=True)
class GridSettings:
    """Parameter grid defaults (one month = 21 days, 1000-point linear grids)."""

    linear_size: int = 1000
    nonlinear_size: int = 1000
    poet_factors: tuple[int, ...] = (1, 2, 3, 4, 5, 6)
    poet_k_max: int = 6
    glasso_size: int = 50
    rho_spacing: str = "log"


def _safe(fn, *args):
    try:
        return fn(*args)
    except (LinAlgFailure, ValueError, FloatingPointError, ArithmeticError) as exc:
        return exc


class Family:
    name: str = ""
    tunable = True

    def __init__(self, grids: GridSettings | None = None):
        self.grids = grids or GridSettings()

    def default_grid(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def fit(self, x: np.ndarray, delta) -> CovarianceEstimate:
        raise NotImplementedError

    def fit_grid(self, x: np.ndarray, grid) -> list:
        """Estimates for every grid value; failures come back as exceptions."""
        return [_safe(self.fit, x, d) for d in grid]

    def original(self, x: np.ndarray) -> CovarianceEstimate:
        raise NotImplementedError


class SampleFamily(Family):
    name = "Sample"
    tunable = False

    def default_grid(self, x):
        return np.array([0.0])

    def fit(self, x, delta=None):
        return sample_covariance(x)

    def original(self, x):
        return sample_covariance(x)


class LinearShrinkageFamily(Family):
    def __init__(self, kind: str, grids: GridSettings | None = None):
        super().__init__(grids)
        self.kind = kind
        self.name = "LW1" if kind == "identity" else "LWCC"

    def default_grid(self, x):
        return np.linspace(0.0, 1.0, self.grids.linear_size)

    def fit(self, x, delta):
        return linear_shrink(sample_covariance(x), build_target(x, self.kind), float(delta))

    def fit_grid(self, x, grid):
        try:
            sample = sample_covariance(x)
            target = build_target(x, self.kind)
        except (ValueError, ArithmeticError) as exc:
            return [exc] * len(grid)
        return linear_shrink_path(sample, target, grid)

    def original(self, x):
        intensity = analytic_intensity_identity(x) if self.kind == "identity" else analytic_intensity_cc(x)
        est = self.fit(x, intensity)
        est.meta["rule"] = "analytic"
        return est


class NonlinearShrinkageFamily(Family):
    name = "LWNL"

    def default_grid(self, x):
        return np.linspace(-0.2, -0.5, self.grids.nonlinear_size)

    def fit(self, x, delta):
        return nonlinear_shrinkage_path(x, [float(delta)])[0]

    def fit_grid(self, x, grid):
        try:
            return nonlinear_shrinkage_path(x, [float(d) for d in grid])
        except (ValueError, ArithmeticError):
            return super().fit_grid(x, grid)

    def original(self, x):
        return self.fit(x, DEFAULT_SPEED)


class PoetFamily(Family):
    name = "POET"

    def default_grid(self, x):
        n = x.shape[1]
        return np.array([k for k in self.grids.poet_factors if k <= n])

    def fit(self, x, delta):
        return poet(x, int(delta))

    def original(self, x):
        t, n = x.shape
        k = poet_num_factors(x, min(self.grids.poet_k_max, n, t))
        est = poet(x, k)
        est.meta["rule"] = "information criterion"
        return est


class GlassoFamily(Family):
    name = "GLASSO"

    def default_grid(self, x):
        s = sample_covariance(x).matrix
        return glasso_rho_grid(s, self.grids.glasso_size, self.grids.rho_spacing)

    def fit(self, x, delta):
        res = glasso_path(sample_covariance(x).matrix, [float(delta)])[0]
        if isinstance(res, Exception):
            raise res
        return res[1]

    def fit_grid(self, x, grid):
        order = np.argsort(-np.asarray(grid, dtype=float), kind="stable")
        try:
            s = sample_covariance(x).matrix
            solved = glasso_path(s, [float(grid[i]) for i in order])
        except (ValueError, ArithmeticError) as exc:
            return [exc] * len(grid)
        out: list = [None] * len(grid)
        for pos, i in enumerate(order):
            res = solved[pos]
            out[i] = res if isinstance(res, Exception) else res[1]
        return out

    def original(self, x):
        """Penalty minimizing BIC over the default grid of this window."""
        s = sample_covariance(x).matrix
        t = x.shape[0]
        grid = self.default_grid(x)
        best = None
        for rho, res in zip(grid, glasso_path(s, grid)):
            if isinstance(res, Exception):
                continue
            prec, cov = res
            try:
                bic = glasso_bic(prec, s, t)
            except (LinAlgFailure, ValueError):
                continue
            if best is None or bic < best[0]:
                best = (bic, cov)
        if best is None:
            raise LinAlgFailure("graphical lasso failed at every penalty")
        bic, cov = best
        cov.meta.update(rule="BIC", bic=float(bic))
        return cov


FAMILIES = {
    "Sample": SampleFamily,
    "LW1": lambda grids=None: LinearShrinkageFamily("identity", grids),
    "LWCC": lambda grids=None: LinearShrinkageFamily("constant_correlation", grids),
    "LWNL": NonlinearShrinkageFamily,
    "POET": PoetFamily,
    "GLASSO": GlassoFamily,
}

_ALIASES = {k.lower(): k for k in FAMILIES}


def get_family(name: str, grids: GridSettings | None = None) -> Family:
    key = _ALIASES.get(name.lower())
    if key is None:
        raise ValueError(f"unknown estimator {name!r}; choose from {sorted(FAMILIES)}")
    return FAMILIES[key](grids)
