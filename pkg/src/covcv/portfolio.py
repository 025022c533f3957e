"""Global minimum-variance portfolios, with and without short sales."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import ReturnsPanel
from .estimators.base import CovarianceEstimate
from .linalg import LinAlgFailure, NotPositiveDefinite, spd_solve

__all__ = [
    "PortfolioWeights",
    "QPIterationLimit",
    "equal_weights",
    "gmv_noshort_weights",
    "gmv_weights",
    "noshort_kkt_residual",
    "portfolio_returns",
]


class QPIterationLimit(LinAlgFailure):
    def __init__(self, iterations: int, residual: float):
        self.residual = residual
        super().__init__(f"active-set QP hit {iterations} iterations (KKT residual {residual:.3e})")


@dataclass(frozen=True, eq=False)
class PortfolioWeights:
    weights: np.ndarray
    long_only: bool = False
    assets: tuple[str, ...] | None = None

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        if w.ndim != 1 or not np.all(np.isfinite(w)):
            raise ValueError("weights must be a finite vector")
        if abs(w.sum() - 1.0) > 1e-10:
            raise ValueError(f"weights sum to {w.sum()!r}, not 1")
        if self.long_only and np.any(w < -1e-12):
            raise ValueError("long-only weights contain a short position")

    def __len__(self):
        return self.weights.shape[0]


def _as_matrix(sigma) -> np.ndarray:
    return sigma.matrix if isinstance(sigma, CovarianceEstimate) else np.asarray(sigma, dtype=float)


def _normalize(x: np.ndarray) -> np.ndarray:
    w = x / x.sum()
    # absorb the last rounding error so the budget holds to machine precision
    w[np.argmax(np.abs(w))] += 1.0 - w.sum()
    return w


def gmv_weights(sigma, *, jitter: bool = False) -> PortfolioWeights:
    """``Sigma^-1 1 / (1' Sigma^-1 1)``.

    With ``jitter=True`` a non positive definite matrix is retried once with
    ``1e-10 * trace / n`` added to the diagonal; the estimate's ``meta``
    records the jitter.
    """
    eig = sigma.eig if isinstance(sigma, CovarianceEstimate) else None
    if eig is not None:
        lam, v = eig
        if lam.min() <= lam.max() * lam.shape[0] * np.finfo(float).eps or lam.min() <= 0:
            if not jitter:
                raise NotPositiveDefinite(int(np.argmin(lam)), "covariance estimate is not positive definite")
        else:
            x = v @ (v.sum(axis=0) / lam)
            return PortfolioWeights(_normalize(x))
    a = _as_matrix(sigma)
    n = a.shape[0]
    ones = np.ones(n)
    try:
        x = spd_solve(a, ones)
    except NotPositiveDefinite:
        if not jitter:
            raise
        eps = 1e-10 * np.trace(a) / n
        x = spd_solve(a + eps * np.eye(n), ones)
        if isinstance(sigma, CovarianceEstimate):
            sigma.meta["jitter"] = eps
    if x.sum() <= 0:
        raise NotPositiveDefinite(0, "1' Sigma^-1 1 is not positive")
    return PortfolioWeights(_normalize(x))


def _project_simplex(v: np.ndarray) -> np.ndarray:
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.arange(1, v.size + 1)
    r = np.nonzero(u - css / k > 0)[0][-1]
    return np.maximum(v - css[r] / (r + 1), 0.0)


def noshort_kkt_residual(sigma, w) -> float:
    """Largest violation of the long-only GMV optimality conditions.

    With ``g = Sigma w`` and ``lam`` the common value of ``g`` on the
    support, checks ``g_i = lam`` where ``w_i > 0``, ``g_i >= lam``
    elsewhere, ``w >= 0`` and ``sum(w) = 1``.
    """
    a = _as_matrix(sigma)
    w = np.asarray(w, dtype=float)
    g = a @ w
    support = w > 0
    lam = float(g[support].mean())
    mu = g - lam
    res = [
        np.abs(mu[support]).max(initial=0.0),
        np.maximum(-mu[~support], 0.0).max(initial=0.0),
        np.abs(mu * w).max(),
        np.maximum(-w, 0.0).max(),
        abs(w.sum() - 1.0) * np.abs(a).max(),
    ]
    return float(max(res))


def gmv_noshort_weights(sigma, *, max_iter: int | None = None, tol: float = 1e-8) -> PortfolioWeights:
    """Long-only GMV weights by a primal active-set method.

    Starts from the simplex projection of the unconstrained solution and
    moves between faces of the simplex; ties in the blocking and release
    choices go to the lowest index (Bland's rule). The result satisfies the
    KKT conditions to ``tol * max|Sigma_ij|``.
    """
    a = _as_matrix(sigma)
    n = a.shape[0]
    scale = np.abs(a).max()
    if scale == 0:
        raise NotPositiveDefinite(0, "zero covariance matrix")
    if n == 1:
        return PortfolioWeights(np.ones(1), long_only=True)
    max_iter = max_iter or 10 * n + 100
    unconstrained = gmv_weights(sigma).weights
    if np.all(unconstrained >= 0):
        return PortfolioWeights(unconstrained, long_only=True)
    w = _project_simplex(unconstrained)
    free = w > 0
    ktol = tol * scale
    for it in range(max_iter):
        idx = np.flatnonzero(free)
        sub = a[np.ix_(idx, idx)]
        y = spd_solve(sub, np.ones(idx.size))
        target = np.zeros(n)
        target[idx] = y / y.sum()
        p = target - w
        if np.abs(p).max() <= 1e-14:
            g = a @ w
            lam = float(g[idx].mean())
            mu = g - lam
            viol = np.flatnonzero(~free & (mu < -ktol))
            if viol.size == 0:
                w = target
                break
            free[viol[0]] = True
            continue
        neg = np.flatnonzero(free & (p < 0))
        if neg.size == 0:
            w = target
            continue
        ratios = -w[neg] / p[neg]
        alpha = ratios.min()
        if alpha >= 1.0:
            w = target
            continue
        block = neg[np.flatnonzero(ratios == alpha)[0]]
        w = w + alpha * p
        w[block] = 0.0
        free[block] = False
        w[~free] = 0.0
    else:
        raise QPIterationLimit(max_iter, noshort_kkt_residual(a, np.maximum(w, 0) / np.maximum(w, 0).sum()))
    return PortfolioWeights(_normalize(np.maximum(w, 0.0)), long_only=True)


def equal_weights(n: int) -> PortfolioWeights:
    if n < 1:
        raise ValueError("need at least one asset")
    return PortfolioWeights(np.full(n, 1.0 / n), long_only=True)


def portfolio_returns(w: PortfolioWeights | np.ndarray, r: ReturnsPanel | np.ndarray) -> np.ndarray:
    """Per-period portfolio returns ``R w``."""
    wv = w.weights if isinstance(w, PortfolioWeights) else np.asarray(w, dtype=float)
    x = r.values if isinstance(r, ReturnsPanel) else np.asarray(r, dtype=float)
    if x.ndim != 2 or x.shape[1] != wv.shape[0]:
        raise ValueError(f"weights of length {wv.shape[0]} do not match returns of shape {x.shape}")
    return x @ wv
