"""Numba kernel for blockwise coordinate descent graphical lasso.

Operates on one connected block at a time. The diagonal of the working
covariance is pinned to the sample variances (unpenalized diagonal).
"""

import numba
import numpy as np


@numba.njit(cache=True, nogil=True)
def _cd_pass(w, s, beta, wb, j, rho, coords, m):
    dmax = 0.0
    for c in range(m):
        k = coords[c]
        wkk = w[k, k]
        old = beta[k]
        g = s[k, j] - wb[k] + wkk * old
        if g > rho:
            new = (g - rho) / wkk
        elif g < -rho:
            new = (g + rho) / wkk
        else:
            new = 0.0
        d = new - old
        if d != 0.0:
            beta[k] = new
            for l in range(w.shape[0]):
                wb[l] += d * w[k, l]
            ad = abs(d) * wkk
            if ad > dmax:
                dmax = ad
    return dmax


@numba.njit(cache=True, nogil=True)
def _lasso_column(w, s, beta, wb, j, rho, tol, max_pass):
    # min_b 0.5 b'W11 b - b's12 + rho |b|_1 over coordinates k != j, with
    # wb = W11 b maintained incrementally. Full passes alternate with passes
    # restricted to the current support until a full pass changes nothing.
    n = w.shape[0]
    full = np.empty(n - 1, dtype=np.int64)
    m = 0
    for k in range(n):
        if k != j:
            full[m] = k
            m += 1
    active = np.empty(n - 1, dtype=np.int64)
    for _ in range(max_pass):
        if _cd_pass(w, s, beta, wb, j, rho, full, m) < tol:
            return
        na = 0
        for c in range(m):
            if beta[full[c]] != 0.0:
                active[na] = full[c]
                na += 1
        for _ in range(max_pass):
            if _cd_pass(w, s, beta, wb, j, rho, active, na) < tol:
                break


@numba.njit(cache=True, nogil=True)
def glasso_block(s, w, b, rho, tol, max_sweeps, inner_tol, max_pass):
    """Run sweeps in place on ``w`` (covariance) and ``b`` (column betas).

    Returns ``(sweeps, last_mean_change)``; ``sweeps == max_sweeps + 1``
    signals non-convergence.
    """
    n = s.shape[0]
    if n == 1:
        w[0, 0] = s[0, 0]
        return 0, 0.0
    # scale for the stopping rule: mean |s_ij| over off-diagonal entries
    scale = 0.0
    for i in range(n):
        for k in range(n):
            if i != k:
                scale += abs(s[i, k])
    scale /= n * (n - 1)
    if scale == 0.0:
        scale = 1.0
    beta = np.empty(n)
    wb = np.empty(n)
    change = 0.0
    for sweep in range(1, max_sweeps + 1):
        change = 0.0
        for j in range(n):
            for k in range(n):
                beta[k] = b[k, j]
            beta[j] = 0.0
            for l in range(n):
                wb[l] = 0.0
            for k in range(n):
                bk = beta[k]
                if bk != 0.0:
                    for l in range(n):
                        wb[l] += bk * w[k, l]
            _lasso_column(w, s, beta, wb, j, rho, inner_tol * scale, max_pass)
            for k in range(n):
                b[k, j] = beta[k]
                if k != j:
                    # wb[k] = (W11 beta)_k is the new off-diagonal of column j
                    change += abs(wb[k] - w[k, j])
                    w[k, j] = wb[k]
                    w[j, k] = wb[k]
        change /= n * (n - 1)
        if change < tol * scale:
            return sweep, change
    return max_sweeps + 1, change


@numba.njit(cache=True, nogil=True)
def precision_from_block(w, b):
    """Recover the precision matrix from converged ``w`` and column betas."""
    n = w.shape[0]
    theta = np.zeros((n, n))
    for j in range(n):
        acc = 0.0
        for k in range(n):
            if k != j:
                acc += w[k, j] * b[k, j]
        t22 = 1.0 / (w[j, j] - acc)
        theta[j, j] = t22
        for k in range(n):
            if k != j:
                theta[k, j] = -b[k, j] * t22
    return theta
