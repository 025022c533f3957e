"""Principal orthogonal complement thresholding (POET)."""

from __future__ import annotations

import numpy as np

from ..data import ReturnsPanel, column_demean
from ..linalg import min_eigenvalue, sym_eigen, symmetric
from .base import CovarianceEstimate
from .shrinkage import sample_covariance

__all__ = ["C_GRID", "poet", "poet_num_factors", "poet_soft_threshold", "select_threshold"]

C_GRID = np.round(np.arange(0, 41) * 0.1, 10)


def _omega(n: int, t: int) -> float:
    return 1.0 / np.sqrt(n) + np.sqrt(np.log(n) / t)


def poet_soft_threshold(residual, c: float, t: int) -> np.ndarray:
    """Soft-threshold off-diagonals at ``c * omega * sqrt(u_ii u_jj)``.

    ``omega = 1/sqrt(n) + sqrt(log(n) / t)``; the diagonal is untouched.
    """
    u = np.asarray(residual, dtype=float)
    n = u.shape[0]
    if c < 0:
        raise ValueError(f"threshold constant must be nonnegative, got {c}")
    if c == 0:
        return symmetric(u)
    if np.isinf(c):
        return symmetric(np.diag(np.diag(u)))
    d = np.sqrt(np.clip(np.diag(u), 0.0, None))
    tau = c * _omega(n, t) * np.outer(d, d)
    out = np.sign(u) * np.maximum(np.abs(u) - tau, 0.0)
    np.fill_diagonal(out, np.diag(u))
    return symmetric(0.5 * (out + out.T))


def select_threshold(residual, t: int, grid=C_GRID) -> tuple[float | None, np.ndarray]:
    """Smallest grid constant giving a positive definite thresholded residual.

    Returns ``(None, diag(residual))`` when no grid value qualifies.
    """
    u = np.asarray(residual, dtype=float)
    n = u.shape[0]
    floor = 1e-10 * np.trace(u) / n
    for c in grid:
        th = poet_soft_threshold(u, float(c), t)
        if min_eigenvalue(th) > floor:
            return float(c), th
    return None, symmetric(np.diag(np.diag(u)))


def poet(r: ReturnsPanel | np.ndarray, k: int, c: float | None = None) -> CovarianceEstimate:
    """Top-``k`` principal components of the sample covariance plus the
    soft-thresholded residual covariance.

    ``c`` fixes the threshold constant; by default the smallest value on
    ``C_GRID`` that keeps the residual positive definite is used.
    """
    x = r.values if isinstance(r, ReturnsPanel) else np.asarray(r, dtype=float)
    t, n = x.shape
    k = int(k)
    if not 0 <= k <= n:
        raise ValueError(f"number of factors must lie in [0, {n}], got {k}")
    s = sample_covariance(x).matrix
    if k == n:
        return CovarianceEstimate(s, "POET", n, {"c": None})
    lam, v = sym_eigen(s)
    vk, lk = v[:, n - k :], lam[n - k :]
    low_rank = (vk * lk) @ vk.T
    residual = s - low_rank
    if c is None:
        c_used, thresholded = select_threshold(residual, t)
    else:
        c_used, thresholded = float(c), poet_soft_threshold(residual, float(c), t)
    return CovarianceEstimate(symmetric(low_rank + thresholded), "POET", k, {"c": c_used})


def _ic1_penalty(t: int, n: int) -> float:
    return (n + t) / (n * t) * np.log(n * t / (n + t))


def poet_num_factors(r: ReturnsPanel | np.ndarray, k_max: int = 6) -> int:
    """Number of factors minimizing ``log(RSS_k / (nT)) + k * g(T, n)``.

    ``RSS_k`` is the squared Frobenius norm of the demeaned returns after
    projecting out their top ``k`` principal components in time, and ``g`` is
    the IC1 penalty of Bai and Ng.
    """
    x = r.values if isinstance(r, ReturnsPanel) else np.asarray(r, dtype=float)
    t, n = x.shape
    if not 1 <= k_max <= min(n, t):
        raise ValueError(f"k_max must lie in [1, {min(n, t)}], got {k_max}")
    xc, _ = column_demean(x)
    sv2 = np.linalg.svd(xc, compute_uv=False) ** 2  # descending
    g = _ic1_penalty(t, n)
    best_k, best_ic = 0, np.inf
    for k in range(k_max + 1):
        rss = max(float(sv2[k:].sum()), 1e-300)
        ic = np.log(rss / (n * t)) + k * g
        if ic < best_ic:
            best_k, best_ic = k, ic
    return best_k
