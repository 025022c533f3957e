"""Out-of-sample performance measures and the HAC test for equal variances."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import norm

__all__ = [
    "PerformanceSummary",
    "VarianceTestResult",
    "andrews_bandwidth",
    "annualized_sd",
    "avg_turnover",
    "hac_long_run_variance",
    "hac_variance_test",
    "msfe",
    "parzen_kernel",
]

TRADING_DAYS = 252


@dataclass(frozen=True)
class PerformanceSummary:
    msfe: float | None
    sd_annualized: float
    turnover: float | None
    n_months: int
    n_days: int


@dataclass(frozen=True)
class VarianceTestResult:
    statistic: float
    p_value: float
    bandwidth: float


def msfe(estimates: Sequence[np.ndarray], realized: Sequence[np.ndarray]) -> float:
    """Mean over months of the squared errors on the upper triangle (diagonal included)."""
    if len(estimates) != len(realized) or len(estimates) == 0:
        raise ValueError("need equally long, nonempty sequences of estimates and realized matrices")
    total = 0.0
    for e, r in zip(estimates, realized):
        e = np.asarray(e, dtype=float)
        r = np.asarray(r, dtype=float)
        if e.shape != r.shape:
            raise ValueError(f"dimension mismatch: {e.shape} vs {r.shape}")
        total += float(np.sum(np.triu(r - e) ** 2))
    return total / len(estimates)


def annualized_sd(returns) -> float:
    r = np.asarray(returns, dtype=float)
    if r.size < 2:
        raise ValueError("need at least two returns")
    return float(r.std(ddof=1) * np.sqrt(TRADING_DAYS))


def avg_turnover(weight_history, drifted_history) -> float:
    """Mean L1 distance between each month's target weights and the
    previous month's drifted weights.

    ``drifted_history[t]`` is the drift of ``weight_history[t]`` to the end
    of month ``t``; it may have the same length as ``weight_history`` (the
    last entry is unused) or one fewer. ``None`` entries mark gaps and the
    pairs touching them are skipped.
    """
    w = list(weight_history)
    d = list(drifted_history)
    if len(w) < 2:
        raise ValueError("turnover needs at least two rebalancing dates")
    if len(d) not in (len(w), len(w) - 1):
        raise ValueError(f"{len(d)} drifted weight vectors do not align with {len(w)} targets")
    dists = []
    for t in range(len(w) - 1):
        nxt, cur = w[t + 1], d[t]
        if nxt is None or cur is None:
            continue
        nxt = getattr(nxt, "weights", nxt)
        cur = getattr(cur, "weights", cur)
        dists.append(float(np.abs(np.asarray(nxt) - np.asarray(cur)).sum()))
    if not dists:
        raise ValueError("no complete pair of consecutive months")
    return float(np.mean(dists))


def parzen_kernel(x) -> np.ndarray:
    a = np.abs(np.asarray(x, dtype=float))
    return np.where(
        a <= 0.5,
        1.0 - 6.0 * a**2 + 6.0 * a**3,
        np.where(a <= 1.0, 2.0 * (1.0 - a) ** 3, 0.0),
    )


def andrews_bandwidth(u: np.ndarray, min_bandwidth: float = 5.0) -> float:
    """Andrews (1991) AR(1) plug-in bandwidth for the Parzen kernel."""
    u = np.asarray(u, dtype=float) - np.mean(u)
    t = u.size
    den = float(u[:-1] @ u[:-1])
    rho = float(u[1:] @ u[:-1]) / den if den > 0 else 0.0
    rho = float(np.clip(rho, -0.97, 0.97))
    alpha2 = 4.0 * rho**2 / (1.0 - rho) ** 4
    return max(2.6614 * (alpha2 * t) ** 0.2, min_bandwidth)


def hac_long_run_variance(u, bandwidth: float) -> float:
    u = np.asarray(u, dtype=float)
    t = u.size
    uc = u - u.mean()
    lrv = float(uc @ uc) / t
    lags = int(min(np.ceil(bandwidth), t - 1))
    for j in range(1, lags + 1):
        k = float(parzen_kernel(j / bandwidth))
        if k == 0.0:
            break
        lrv += 2.0 * k * float(uc[j:] @ uc[:-j]) / t
    return lrv


def hac_variance_test(r1, r2, *, min_bandwidth: float = 5.0) -> VarianceTestResult:
    """Two-sided test of ``Var(r1) == Var(r2)`` with a Parzen-kernel HAC
    standard error.

    The statistic is ``sqrt(T) (v1 - v2) / s`` where ``s^2`` is the long-run
    variance of ``u_t = (r1_t - mean r1)^2 - (r2_t - mean r2)^2``.
    """
    r1 = np.asarray(r1, dtype=float)
    r2 = np.asarray(r2, dtype=float)
    if r1.shape != r2.shape or r1.ndim != 1:
        raise ValueError("return series must be one-dimensional and of equal length")
    t = r1.size
    if t < 60:
        raise ValueError(f"need at least 60 observations, got {t}")
    u = (r1 - r1.mean()) ** 2 - (r2 - r2.mean()) ** 2
    if not np.any(u - u.mean()):
        return VarianceTestResult(0.0, 1.0, float(min_bandwidth))
    bw = andrews_bandwidth(u, min_bandwidth)
    lrv = hac_long_run_variance(u, bw)
    if lrv <= 0.0:
        return VarianceTestResult(0.0, 1.0, bw)
    diff = r1.var(ddof=1) - r2.var(ddof=1)
    stat = float(np.sqrt(t) * diff / np.sqrt(lrv))
    p = float(2.0 * norm.sf(abs(stat)))
    return VarianceTestResult(stat, min(max(p, 0.0), 1.0), bw)
