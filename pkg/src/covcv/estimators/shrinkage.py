"""Sample covariance and linear shrinkage toward structured targets."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..data import ReturnsPanel, column_demean
from ..linalg import EigenDecomposition, sym_eigen, symmetric
from .base import CovarianceEstimate

__all__ = [
    "ShrinkageTarget",
    "analytic_intensity_cc",
    "analytic_intensity_identity",
    "build_target",
    "linear_shrink",
    "linear_shrink_path",
    "sample_covariance",
]


def _values(r) -> np.ndarray:
    return r.values if isinstance(r, ReturnsPanel) else np.asarray(r, dtype=float)


def sample_covariance(r: ReturnsPanel | np.ndarray) -> CovarianceEstimate:
    """Unbiased sample covariance, normalized by ``T - 1``."""
    x = _values(r)
    t = x.shape[0]
    if t < 2:
        raise ValueError(f"sample covariance needs T >= 2, got {t}")
    xc, _ = column_demean(x)
    s = xc.T @ xc / (t - 1)
    return CovarianceEstimate(symmetric(s), "Sample")


@dataclass(frozen=True)
class ShrinkageTarget:
    kind: str  # "identity" | "constant_correlation"
    matrix: np.ndarray
    mean_variance: float
    mean_correlation: float | None = None


def zero_variance(var: np.ndarray) -> np.ndarray:
    """Variances that are zero up to the rounding left by demeaning a constant column."""
    return var <= np.finfo(float).eps ** 1.5 * max(float(var.max(initial=0.0)), np.finfo(float).tiny)


def _mean_correlation(s: np.ndarray) -> float:
    sd = np.sqrt(np.diag(s))
    if np.any(zero_variance(np.diag(s))):
        raise ValueError("constant-correlation target undefined: an asset has zero variance")
    n = s.shape[0]
    if n == 1:
        return 0.0
    corr = s / np.outer(sd, sd)
    iu = np.triu_indices(n, 1)
    return float(corr[iu].mean())


def _target_from_sample(s: np.ndarray, kind: str) -> ShrinkageTarget:
    n = s.shape[0]
    var = np.diag(s)
    mbar = float(var.mean())
    if kind == "identity":
        return ShrinkageTarget("identity", symmetric(mbar * np.eye(n)), mbar)
    if kind == "constant_correlation":
        rbar = _mean_correlation(s)
        sd = np.sqrt(var)
        f = rbar * np.outer(sd, sd)
        np.fill_diagonal(f, var)
        return ShrinkageTarget("constant_correlation", symmetric(f), mbar, rbar)
    raise ValueError(f"unknown shrinkage target {kind!r}")


def build_target(r: ReturnsPanel | np.ndarray, kind: str) -> ShrinkageTarget:
    """Shrinkage target built from the sample covariance of ``r``.

    ``identity`` is ``mean(diag S) * I``. ``constant_correlation`` keeps the
    sample variances and sets every correlation to the average pairwise
    sample correlation.
    """
    return _target_from_sample(sample_covariance(r).matrix, kind)


def _method_for(target: ShrinkageTarget) -> str:
    return "LW1" if target.kind == "identity" else "LWCC"


def linear_shrink(sample: CovarianceEstimate, target: ShrinkageTarget, s: float) -> CovarianceEstimate:
    """``s * target + (1 - s) * sample``."""
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"shrinkage intensity must lie in [0, 1], got {s}")
    a, f = sample.matrix, target.matrix
    if a.shape != f.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {f.shape}")
    if s == 0.0:
        m = a
    elif s == 1.0:
        m = f
    else:
        m = s * f + (1.0 - s) * a
        m.setflags(write=False)
    return CovarianceEstimate(m, _method_for(target), float(s))


def linear_shrink_path(sample: CovarianceEstimate, target: ShrinkageTarget, grid) -> list[CovarianceEstimate]:
    """Shrunk estimates for every intensity in ``grid``.

    With the identity target all members share the sample eigenvectors, so
    each estimate carries its spectrum and the dense matrix is built only on
    demand.
    """
    method = _method_for(target)
    if target.kind != "identity":
        return [linear_shrink(sample, target, float(s)) for s in grid]
    eig = sample.eig or sym_eigen(sample.matrix)
    lam, v = eig
    mbar = target.mean_variance
    out = []
    for s in grid:
        s = float(s)
        if not 0.0 <= s <= 1.0:
            raise ValueError(f"shrinkage intensity must lie in [0, 1], got {s}")
        out.append(CovarianceEstimate(None, method, s, eig=EigenDecomposition(s * mbar + (1 - s) * lam, v)))
    return out


def analytic_intensity_identity(r: ReturnsPanel | np.ndarray) -> float:
    """Plug-in optimal intensity toward ``mean variance * I``.

    Uses the 1/T moment estimators of the original derivation:
    ``d2 = ||S - m I||^2 / n``, ``b2 = min(sum_t ||x_t x_t' - S||^2 / (n T^2), d2)``
    and returns ``b2 / d2`` (0 when ``d2 == 0``).
    """
    x = _values(r)
    t, n = x.shape
    if t < 2:
        raise ValueError(f"need T >= 2, got {t}")
    xc, _ = column_demean(x)
    s = xc.T @ xc / t
    m = np.trace(s) / n
    d2 = (np.sum(s * s) - 2 * m * np.trace(s) + m * m * n) / n
    if d2 <= 0.0:
        return 0.0
    # sum_t ||x_t x_t' - S||_F^2 = sum_t ||x_t||^4 - T ||S||_F^2
    row_sq = np.einsum("ij,ij->i", xc, xc)
    bbar2 = (np.sum(row_sq**2) - t * np.sum(s * s)) / (n * t * t)
    b2 = min(max(bbar2, 0.0), d2)
    return float(np.clip(b2 / d2, 0.0, 1.0))


def analytic_intensity_cc(r: ReturnsPanel | np.ndarray) -> float:
    """Plug-in optimal intensity toward the constant-correlation target.

    ``clip(kappa / T, 0, 1)`` with ``kappa = (pi - rho) / gamma`` built from
    the 1/T sample moments of the demeaned returns.
    """
    x = _values(r)
    t, n = x.shape
    if t < 2:
        raise ValueError(f"need T >= 2, got {t}")
    xc, _ = column_demean(x)
    s = xc.T @ xc / t
    var = np.diag(s)
    if np.any(zero_variance(var)):
        raise ValueError("constant-correlation intensity undefined: an asset has zero variance")
    sd = np.sqrt(var)
    rbar = _mean_correlation(s)
    prior = rbar * np.outer(sd, sd)
    np.fill_diagonal(prior, var)

    y = xc * xc
    pi_mat = y.T @ y / t - s * s
    pi_hat = pi_mat.sum()

    theta = (xc**3).T @ xc / t - var[:, None] * s
    np.fill_diagonal(theta, 0.0)
    rho_hat = np.trace(pi_mat) + rbar * np.sum((sd[None, :] / sd[:, None]) * theta)

    gamma = np.sum((s - prior) ** 2)
    if gamma <= 0.0:
        return 0.0
    return clip_intensity((pi_hat - rho_hat) / gamma, t)


def clip_intensity(kappa: float, t: int) -> float:
    return float(min(1.0, max(0.0, kappa / t)))
