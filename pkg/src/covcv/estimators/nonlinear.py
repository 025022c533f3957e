"""Analytical nonlinear shrinkage of the sample spectrum.

Each sample eigenvalue is replaced by a value computed from an Epanechnikov
kernel estimate of the limiting spectral density and its Hilbert transform
(Ledoit and Wolf's analytical formula), with a variable bandwidth
``lambda_j * T**speed``. Sample eigenvectors are kept.
"""

from __future__ import annotations

import numpy as np

from ..data import ReturnsPanel
from ..linalg import EigenDecomposition, sym_eigen
from .base import CovarianceEstimate
from .shrinkage import sample_covariance

__all__ = ["DEFAULT_SPEED", "nonlinear_shrinkage", "nonlinear_shrinkage_path", "shrink_spectrum"]

DEFAULT_SPEED = -0.35
SPEED_RANGE = (-0.5, -0.2)
_SQRT5 = np.sqrt(5.0)


def shrink_spectrum(lam: np.ndarray, n: int, t_eff: int, speed: float) -> np.ndarray:
    """Shrunk eigenvalues for an ascending sample spectrum ``lam`` of length ``n``.

    ``t_eff`` is the effective sample size (``T - 1`` after demeaning).
    """
    lam = np.asarray(lam, dtype=float)
    h = float(t_eff) ** speed
    q = n / t_eff
    # only the top min(n, t_eff) eigenvalues carry information
    m = min(n, t_eff)
    lam_pos = lam[n - m :].copy()
    floor = 1e-12 * max(float(np.mean(lam_pos)), np.finfo(float).tiny)
    lam_pos = np.maximum(lam_pos, floor)

    L = lam_pos[:, None]  # evaluation point (rows)
    H = h * lam_pos[None, :]  # bandwidth of each kernel (columns)
    x = (L - lam_pos[None, :]) / H
    f = (3.0 / (4.0 * _SQRT5)) * np.mean(np.maximum(1.0 - x * x / 5.0, 0.0) / H, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        logterm = np.log(np.abs((_SQRT5 - x) / (_SQRT5 + x)))
    hf = (-3.0 / (10.0 * np.pi)) * x + (3.0 / (4.0 * _SQRT5 * np.pi)) * (1.0 - x * x / 5.0) * logterm
    edge = np.abs(x) == _SQRT5
    hf[edge] = (-3.0 / (10.0 * np.pi)) * x[edge]
    hilbert = np.mean(hf / H, axis=1)

    if n <= t_eff:
        d = lam_pos / ((np.pi * q * lam_pos * f) ** 2 + (1.0 - q - np.pi * q * lam_pos * hilbert) ** 2)
    else:
        arg = (1.0 + _SQRT5 * h) / (1.0 - _SQRT5 * h)
        with np.errstate(invalid="ignore", divide="ignore"):
            h0 = (1.0 / np.pi) * (
                3.0 / (10.0 * h * h)
                + 3.0 / (4.0 * _SQRT5 * h) * (1.0 - 1.0 / (5.0 * h * h)) * np.log(arg)
            ) * np.mean(1.0 / lam_pos)
            d0 = 1.0 / (np.pi * (n - t_eff) / t_eff * h0)
        d1 = lam_pos / (np.pi**2 * lam_pos**2 * (f**2 + hilbert**2))
        if not np.isfinite(d0) or d0 <= 0:
            raise FloatingPointError(
                f"null-space shrinkage is not finite (bandwidth {h:.4g} too wide for the "
                f"zero eigenvalues; speed {speed})"
            )
        d = np.concatenate([np.full(n - t_eff, d0), d1])
    bad = np.flatnonzero(~np.isfinite(d) | (d <= 0))
    if bad.size:
        i = int(bad[0]) + (n - m if n <= t_eff else 0)
        raise FloatingPointError(f"kernel sums not finite at sample eigenvalue {lam[min(i, n - 1)]:.6g} (index {i})")
    return d


def _check(x: np.ndarray, speed: float) -> None:
    t, n = x.shape
    if n < 2:
        raise ValueError("nonlinear shrinkage needs at least 2 assets")
    if t < 12:
        raise ValueError(f"nonlinear shrinkage needs T >= 12, got {t}")
    lo, hi = SPEED_RANGE
    if not lo - 1e-12 <= speed <= hi + 1e-12:
        raise ValueError(f"bandwidth speed must lie in [{lo}, {hi}], got {speed}")


def nonlinear_shrinkage(r: ReturnsPanel | np.ndarray, speed: float = DEFAULT_SPEED) -> CovarianceEstimate:
    return nonlinear_shrinkage_path(r, [speed])[0]


def nonlinear_shrinkage_path(r: ReturnsPanel | np.ndarray, speeds) -> list[CovarianceEstimate]:
    """One estimate per bandwidth speed, sharing the sample eigenvectors."""
    x = r.values if isinstance(r, ReturnsPanel) else np.asarray(r, dtype=float)
    t, n = x.shape
    for sp in speeds:
        _check(x, float(sp))
    sample = sample_covariance(x)
    lam, v = sym_eigen(sample.matrix)
    out = []
    for sp in speeds:
        d = shrink_spectrum(lam, n, t - 1, float(sp))
        out.append(CovarianceEstimate(None, "LWNL", float(sp), eig=EigenDecomposition(d, v)))
    return out
