"""Time-ordered m-fold cross-validation of an estimator's free parameter.

Fold ``i`` trains on ``[i*u, i*u + v)`` and tests on the ``u`` observations
that follow. Two criteria are supported: the squared Frobenius error
against the test block's realized covariance (``SFE``) and the empirical
variance of the out-of-sample returns of the portfolio built on the
training estimate (``PortfolioVariance``).
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .data import ReturnsPanel, column_demean
from .estimators.base import CovarianceEstimate
from .estimators.families import Family
from .linalg import LinAlgFailure, frobenius_norm_sq
from .portfolio import gmv_noshort_weights, gmv_weights

__all__ = [
    "CvResult",
    "FoldArithmeticError",
    "FoldScheme",
    "SelectionCriterion",
    "cv_select",
    "make_folds",
    "portfolio_weights_for",
    "realized_covariance",
    "sfe",
]

log = logging.getLogger(__name__)

REALIZED_SCALES = ("unscaled", "per_period")


class FoldArithmeticError(ValueError):
    pass


@dataclass(frozen=True)
class FoldScheme:
    m: int
    train_len: int
    test_len: int
    folds: tuple[tuple[range, range], ...]

    @property
    def tau(self) -> int:
        return self.train_len + self.m * self.test_len


def make_folds(tau: int, m: int, nu: int, upsilon: int) -> FoldScheme:
    """Rolling train/test splits covering ``[0, tau)``; requires ``nu + m*upsilon == tau``."""
    if min(m, nu, upsilon) < 1:
        raise FoldArithmeticError("fold count, training and test lengths must be positive")
    if nu + m * upsilon != tau:
        raise FoldArithmeticError(
            f"{m} folds of {upsilon} test observations after {nu} training observations "
            f"require tau = {nu + m * upsilon}, got {tau}"
        )
    folds = tuple(
        (range(i * upsilon, i * upsilon + nu), range(i * upsilon + nu, (i + 1) * upsilon + nu))
        for i in range(m)
    )
    return FoldScheme(m, nu, upsilon, folds)


def realized_covariance(test: ReturnsPanel | np.ndarray, scale: str = "unscaled") -> np.ndarray:
    """Centered cross-product of a test block.

    ``scale="unscaled"`` returns ``(R - mu)'(R - mu)``; ``"per_period"``
    divides by ``len(test) - 1``.
    """
    x = test.values if isinstance(test, ReturnsPanel) else np.asarray(test, dtype=float)
    u = x.shape[0]
    if u < 2:
        raise ValueError(f"realized covariance needs at least 2 observations, got {u}")
    if scale not in REALIZED_SCALES:
        raise ValueError(f"realized scale must be one of {REALIZED_SCALES}, got {scale!r}")
    xc, _ = column_demean(x)
    rc = xc.T @ xc
    if scale == "per_period":
        rc /= u - 1
    rc = 0.5 * (rc + rc.T)
    rc.setflags(write=False)
    return rc


def sfe(estimate, realized) -> float:
    """Squared Frobenius distance between an estimate and a realized covariance."""
    e = estimate.matrix if isinstance(estimate, CovarianceEstimate) else np.asarray(estimate, dtype=float)
    r = np.asarray(realized, dtype=float)
    if e.shape != r.shape:
        raise ValueError(f"dimension mismatch: {e.shape} vs {r.shape}")
    return frobenius_norm_sq(e - r)


@dataclass(frozen=True)
class SelectionCriterion:
    kind: str  # "SFE" | "PortfolioVariance"
    portfolio_rule: str | None = None  # "GMV" | "GMV_NOSHORT"
    variance: str = "pooled"  # "pooled" | "per_fold"

    def __post_init__(self):
        if self.kind not in ("SFE", "PortfolioVariance"):
            raise ValueError(f"unknown criterion {self.kind!r}")
        if (self.kind == "PortfolioVariance") != (self.portfolio_rule is not None):
            raise ValueError("portfolio_rule is required for, and only for, PortfolioVariance")
        if self.portfolio_rule not in (None, "GMV", "GMV_NOSHORT"):
            raise ValueError(f"unknown portfolio rule {self.portfolio_rule!r}")
        if self.variance not in ("pooled", "per_fold"):
            raise ValueError(f"unknown variance mode {self.variance!r}")

    @classmethod
    def sfe(cls) -> SelectionCriterion:
        return cls("SFE")

    @classmethod
    def portfolio_variance(cls, rule: str = "GMV", variance: str = "pooled") -> SelectionCriterion:
        return cls("PortfolioVariance", rule, variance)


@dataclass
class CvResult:
    grid: np.ndarray
    scores: np.ndarray  # averaged criterion per grid value, nan if disqualified
    per_fold_detail: np.ndarray  # (m, G)
    best_index: int
    disqualified: dict[int, str] = field(default_factory=dict)

    @property
    def best_parameter(self):
        return self.grid[self.best_index].item()

    @property
    def best_score(self) -> float:
        return float(self.scores[self.best_index])

    @property
    def per_parameter_scores(self) -> dict:
        return {g.item(): float(s) for g, s in zip(self.grid, self.scores)}


def portfolio_weights_for(estimate: CovarianceEstimate, rule: str) -> np.ndarray:
    if rule == "GMV":
        return gmv_weights(estimate).weights
    if rule == "GMV_NOSHORT":
        return gmv_noshort_weights(estimate).weights
    raise ValueError(f"unknown portfolio rule {rule!r}")


class _SpectralSfe:
    """``||V diag(d) V' - C||_F^2`` for many ``d`` sharing one ``V``."""

    def __init__(self, realized: np.ndarray):
        self.realized = realized
        self.norm_c = frobenius_norm_sq(realized)
        self._v = None
        self._diag = None

    def __call__(self, est: CovarianceEstimate) -> float:
        d, v = est.eig
        if v is not self._v:
            self._v = v
            self._diag = np.einsum("ij,ij->j", self.realized @ v, v)
        return float(d @ d - 2.0 * d @ self._diag + self.norm_c)


def _score_fold(family: Family, x: np.ndarray, fold, grid, criterion: SelectionCriterion, realized_scale: str):
    train, test = fold
    xtr, xte = x[train.start : train.stop], x[test.start : test.stop]
    estimates = family.fit_grid(xtr, grid)
    g = len(grid)
    errors: dict[int, str] = {}
    if criterion.kind == "SFE":
        realized = realized_covariance(xte, realized_scale)
        fast = _SpectralSfe(realized)
        out = np.full(g, np.nan)
        for j, est in enumerate(estimates):
            if isinstance(est, Exception):
                errors[j] = f"{type(est).__name__}: {est}"
                continue
            out[j] = fast(est) if est.eig is not None and est._matrix is None else sfe(est.matrix, realized)
        return out, errors
    out = np.full((g, xte.shape[0]), np.nan)
    for j, est in enumerate(estimates):
        if isinstance(est, Exception):
            errors[j] = f"{type(est).__name__}: {est}"
            continue
        try:
            w = portfolio_weights_for(est, criterion.portfolio_rule)
        except (LinAlgFailure, ValueError) as exc:
            errors[j] = f"{type(exc).__name__}: {exc}"
            continue
        out[j] = xte @ w
    return out, errors


def cv_select(
    insample: ReturnsPanel | np.ndarray,
    family: Family,
    grid,
    scheme: FoldScheme,
    criterion: SelectionCriterion,
    *,
    realized_scale: str = "unscaled",
    threads: int = 1,
) -> CvResult:
    """Pick the grid value with the smallest cross-validated criterion.

    A grid value that fails on any fold is disqualified (reason recorded in
    ``CvResult.disqualified``). Ties go to the earliest grid value.
    """
    x = insample.values if isinstance(insample, ReturnsPanel) else np.asarray(insample, dtype=float)
    grid = np.asarray(grid)
    if grid.size == 0:
        raise ValueError("empty parameter grid")
    if x.shape[0] != scheme.tau:
        raise FoldArithmeticError(
            f"in-sample window has {x.shape[0]} observations; the fold scheme requires tau = {scheme.tau}"
        )

    def run(fold):
        return _score_fold(family, x, fold, grid, criterion, realized_scale)

    if threads > 1 and scheme.m > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, scheme.folds))
    else:
        results = [run(f) for f in scheme.folds]

    disq: dict[int, str] = {}
    for fold_no, (_, errors) in enumerate(results):
        for j, msg in errors.items():
            disq.setdefault(j, f"fold {fold_no}: {msg}")

    g = grid.size
    if criterion.kind == "SFE":
        detail = np.vstack([r for r, _ in results])
        scores = detail.mean(axis=0)
    else:
        rets = [r for r, _ in results]  # each (G, upsilon)
        detail = np.vstack([r.var(axis=1, ddof=1) for r in rets])
        if criterion.variance == "pooled":
            scores = np.concatenate(rets, axis=1).var(axis=1, ddof=1)
        else:
            scores = detail.mean(axis=0)
    for j in disq:
        scores[j] = np.nan
    if np.all(np.isnan(scores)):
        reasons = "; ".join(f"{grid[j]!r}: {m}" for j, m in list(disq.items())[:3])
        raise LinAlgFailure(f"every grid value was disqualified ({reasons})")
    best = int(np.nanargmin(scores))
    if disq:
        log.debug("%s: %d of %d grid values disqualified", family.name, len(disq), g)
    return CvResult(grid, scores, detail, best, disq)
