"""Graphical lasso with an unpenalized diagonal.

The solver is the blockwise coordinate descent of Friedman, Hastie and
Tibshirani (2008) run on the covariance: each column is a lasso problem
solved by cyclic coordinate descent. Before solving, the variables are split
into the connected components of ``|s_ij| > rho`` (exact block screening),
so large penalties cost almost nothing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.csgraph import connected_components

from ..linalg import (
    LinAlgFailure,
    NotPositiveDefinite,
    cholesky_logdet,
    spd_solve,
    symmetric,
)
from ._glasso_cd import glasso_block, precision_from_block
from .base import CovarianceEstimate
from .shrinkage import zero_variance

__all__ = [
    "GlassoConvergenceError",
    "GlassoState",
    "PrecisionEstimate",
    "glasso",
    "glasso_bic",
    "glasso_path",
    "glasso_rho_grid",
]


class GlassoConvergenceError(LinAlgFailure):
    def __init__(self, sweeps: int, residual: float):
        self.sweeps = sweeps
        self.residual = residual
        super().__init__(
            f"graphical lasso did not converge after {sweeps} sweeps "
            f"(mean off-diagonal change {residual:.3e})"
        )


@dataclass(frozen=True)
class PrecisionEstimate:
    matrix: np.ndarray
    penalty: float

    @property
    def sparsity_pattern(self) -> set[tuple[int, int]]:
        """Off-diagonal ``(i, j)`` pairs that are exact zeros."""
        zi, zj = np.nonzero(self.matrix == 0.0)
        return {(int(i), int(j)) for i, j in zip(zi, zj) if i != j}

    def n_nonzero_offdiag(self) -> int:
        nz = self.matrix != 0.0
        return int(nz.sum() - np.count_nonzero(np.diag(nz)))


@dataclass
class GlassoState:
    """Warm-start carrier: working covariance and per-column lasso betas."""

    w: np.ndarray
    b: np.ndarray
    meta: dict = field(default_factory=dict)


def _check_input(s) -> np.ndarray:
    s = symmetric(s)
    if np.any(np.diag(s) <= 0) or np.any(zero_variance(np.diag(s))):
        raise ValueError("glasso needs a strictly positive diagonal (zero-variance asset)")
    return s


def _feasible_start(w: np.ndarray, s: np.ndarray, rho: float) -> np.ndarray:
    # The column updates keep W positive definite only when they start inside
    # the dual box |W_ij - s_ij| <= rho. Moving a PD start towards s by the
    # smallest sufficient fraction lands inside it and stays PD.
    v = np.abs(w - s).max()
    if v <= rho:
        return w
    a = 1.0 - rho / v
    return np.ascontiguousarray((1.0 - a) * w + a * s)


def glasso(
    s,
    rho: float,
    *,
    tol: float = 1e-6,
    max_sweeps: int = 10_000,
    inner_tol: float = 1e-5,
    max_pass: int = 1_000,
    warm: GlassoState | None = None,
) -> tuple[PrecisionEstimate, CovarianceEstimate]:
    """Penalized Gaussian MLE of the precision matrix.

    Maximizes ``log|T| - tr(S T) - rho * sum_{i != j} |T_ij|``. The returned
    covariance is the solver's working matrix ``W`` (``W_ii = s_ii``), which
    equals the inverse of the returned precision at convergence.

    Parameters
    ----------
    s : array of shape (n, n)
        Sample covariance with positive diagonal.
    rho : float
        Off-diagonal L1 penalty, ``rho >= 0``. ``rho = 0`` returns the exact
        inverse of ``s`` and fails if ``s`` is singular.
    tol : float
        Stop when the mean absolute change of ``W``'s off-diagonals in a
        sweep falls below ``tol * mean|s_ij|`` (``i != j``).
    warm : GlassoState, optional
        Solution at a nearby penalty. It is updated in place.
    """
    s = _check_input(s)
    if rho < 0:
        raise ValueError(f"rho must be nonnegative, got {rho}")
    n = s.shape[0]
    if rho == 0.0:
        try:
            theta = spd_solve(s, np.eye(n))
        except NotPositiveDefinite as exc:
            raise NotPositiveDefinite(
                exc.pivot, "rho = 0 with singular sample covariance: unpenalized MLE undefined"
            ) from exc
        theta = symmetric(0.5 * (theta + theta.T))
        cov = CovarianceEstimate(s, "GLASSO", 0.0, {"sweeps": 0})
        return PrecisionEstimate(theta, 0.0), cov

    state = warm if warm is not None else GlassoState(np.diag(np.diag(s)).copy(), np.zeros((n, n)))
    adj = np.abs(s) > rho
    np.fill_diagonal(adj, False)
    n_comp, labels = connected_components(adj, directed=False)

    w_new = np.diag(np.diag(s))
    b_new = np.zeros((n, n))
    theta = np.zeros((n, n))
    sweeps_total = 0
    for c in range(n_comp):
        idx = np.flatnonzero(labels == c)
        if idx.size == 1:
            i = idx[0]
            theta[i, i] = 1.0 / s[i, i]
            continue
        ix = np.ix_(idx, idx)
        sb = np.ascontiguousarray(s[ix])
        wb = np.ascontiguousarray(state.w[ix])
        np.fill_diagonal(wb, np.diag(sb))
        wb = _feasible_start(wb, sb, rho)
        bb = np.ascontiguousarray(state.b[ix])
        sweeps, change = glasso_block(sb, wb, bb, rho, tol, max_sweeps, inner_tol, max_pass)
        if sweeps > max_sweeps:
            raise GlassoConvergenceError(max_sweeps, change)
        sweeps_total = max(sweeps_total, sweeps)
        w_new[ix] = wb
        b_new[ix] = bb
        theta[ix] = precision_from_block(wb, bb)

    state.w, state.b = w_new, b_new
    # Column-wise recovery leaves tiny asymmetries; average, keeping exact zeros
    # only where both triangles agree.
    theta = 0.5 * (theta + theta.T)
    theta.setflags(write=False)
    w_sym = symmetric(0.5 * (w_new + w_new.T))
    meta = {"sweeps": sweeps_total, "components": int(n_comp)}
    return PrecisionEstimate(theta, float(rho)), CovarianceEstimate(w_sym, "GLASSO", float(rho), meta)


def glasso_path(s, rhos, **kwargs) -> list[tuple[PrecisionEstimate, CovarianceEstimate] | Exception]:
    """Solve along a penalty grid with warm starts, in the grid's order.

    Failures at individual penalties are returned in place of the result
    so that callers can disqualify single grid points.
    """
    s = _check_input(s)
    state = None
    out: list = []
    for rho in rhos:
        try:
            if rho == 0.0:
                out.append(glasso(s, 0.0, **kwargs))
                continue
            if state is None:
                n = s.shape[0]
                state = GlassoState(np.diag(np.diag(s)).copy(), np.zeros((n, n)))
            out.append(glasso(s, float(rho), warm=state, **kwargs))
        except (LinAlgFailure, ValueError) as exc:
            state = None
            out.append(exc)
    return out


def glasso_bic(theta: PrecisionEstimate | np.ndarray, s, t: int) -> float:
    """``-log|T| + tr(S T) + log(t)/2 * #{i != j : T_ij != 0}``."""
    mat = theta.matrix if isinstance(theta, PrecisionEstimate) else np.asarray(theta, dtype=float)
    s = np.asarray(s, dtype=float)
    logdet = cholesky_logdet(mat)
    nz = mat != 0.0
    n_off = int(nz.sum() - np.count_nonzero(np.diag(nz)))
    return -logdet + float(np.einsum("ij,ji->", s, mat)) + 0.5 * np.log(t) * n_off


def glasso_rho_grid(s, g: int = 50, spacing: str = "log") -> np.ndarray:
    """Descending penalty grid from ``u = max|s_ij|`` down to ``0.01 u``.

    ``spacing="log"`` is equally spaced in ``log10``; ``"linear"`` follows
    ``k(x) = (x - 1)(e - u)/(G - 1) + u`` literally.
    """
    u = float(np.abs(np.asarray(s, dtype=float)).max(initial=0.0))
    if u == 0.0:
        raise ValueError("cannot build a penalty grid for a zero matrix")
    e = 0.01 * u
    if g == 1:
        return np.array([u])
    if spacing == "log":
        grid = np.logspace(np.log10(u), np.log10(e), g)
    elif spacing == "linear":
        x = np.arange(1, g + 1)
        grid = (x - 1) * (e - u) / (g - 1) + u
    else:
        raise ValueError(f"unknown rho-grid spacing {spacing!r}")
    grid[0], grid[-1] = u, e
    return grid
