"""Rolling-window backtest of minimum-variance strategies.

At the start of every investment month the covariance matrix is estimated on
the trailing in-sample window (optionally tuning the estimator's parameter
by cross-validation inside that window), portfolio weights are solved, and
those weights are held for the month. Nothing after the rebalancing date is
visible to the estimate.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .cross_validation import (
    SelectionCriterion,
    cv_select,
    make_folds,
    portfolio_weights_for,
    realized_covariance,
)
from .data import ReturnsPanel
from .estimators.families import GridSettings, get_family
from .linalg import LinAlgFailure
from .portfolio import PortfolioWeights, equal_weights
from .stats import (
    PerformanceSummary,
    annualized_sd,
    avg_turnover,
    hac_variance_test,
    msfe,
)

__all__ = [
    "BacktestConfig",
    "BacktestResult",
    "StrategyResult",
    "StrategySpec",
    "drift_weights",
    "month_schedule",
    "run_backtest",
]

log = logging.getLogger(__name__)

MODES = ("original", "cv1", "cv2")


@dataclass(frozen=True)
class StrategySpec:
    method: str  # an estimator family name or "Naive"
    mode: str = "original"
    grid: tuple[float, ...] | None = None
    name: str | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.method.lower() == "naive":
            object.__setattr__(self, "method", "Naive")
            if self.mode != "original":
                raise ValueError("the Naive strategy has nothing to tune")
        else:
            fam = get_family(self.method)
            object.__setattr__(self, "method", fam.name)
            if not fam.tunable and self.mode != "original":
                raise ValueError(f"{fam.name} has no parameter to cross-validate")

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        return self.method if self.mode == "original" else f"{self.method}-{self.mode.upper()}"


@dataclass(frozen=True)
class BacktestConfig:
    strategies: tuple[StrategySpec, ...]
    portfolio_rule: str = "GMV"
    in_sample_months: int = 24
    month_len: int = 21
    month_mode: str = "blocks"
    cv_folds: int = 12
    cv_train: int = 252
    cv_test: int = 21
    cv_variance: str = "pooled"
    realized_scale: str = "unscaled"
    drift: str = "daily"
    log_returns: bool = False
    jitter: bool = False
    grids: GridSettings = field(default_factory=GridSettings)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "strategies", tuple(self.strategies))
        if self.portfolio_rule not in ("GMV", "GMV_NOSHORT"):
            raise ValueError(f"unknown portfolio rule {self.portfolio_rule!r}")
        if self.month_mode not in ("blocks", "calendar"):
            raise ValueError(f"unknown month mode {self.month_mode!r}")
        if self.drift not in ("daily", "monthly"):
            raise ValueError(f"unknown drift mode {self.drift!r}")
        labels = [s.label for s in self.strategies]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate strategy labels in {labels}")
        if self.uses_cv and self.tau != self.cv_train + self.cv_folds * self.cv_test:
            raise ValueError(
                f"in-sample window of {self.tau} days does not match the fold scheme "
                f"({self.cv_train} + {self.cv_folds} x {self.cv_test})"
            )

    @property
    def tau(self) -> int:
        return self.in_sample_months * self.month_len

    @property
    def uses_cv(self) -> bool:
        return any(s.mode != "original" for s in self.strategies)


@dataclass
class StrategyResult:
    label: str
    returns: np.ndarray  # one entry per out-of-sample day, nan inside gaps
    weights: list  # per month: ndarray or None
    drifted: list
    parameters: list
    estimates: list  # per month: estimated covariance or None
    realized: list
    gaps: dict[int, str] = field(default_factory=dict)

    def summary(self, naive: bool = False) -> PerformanceSummary:
        ok = ~np.isnan(self.returns)
        months = [t for t, w in enumerate(self.weights) if w is not None]
        m = None
        if not naive and months:
            pairs = [(self.estimates[t], self.realized[t]) for t in months if self.estimates[t] is not None]
            if pairs:
                m = msfe([p[0] for p in pairs], [p[1] for p in pairs])
        to = None
        if len(self.weights) >= 2:
            try:
                to = avg_turnover(self.weights, self.drifted)
            except ValueError:
                to = None
        sd = annualized_sd(self.returns[ok]) if ok.sum() >= 2 else float("nan")
        return PerformanceSummary(m, sd, to, len(months), int(ok.sum()))


@dataclass
class BacktestResult:
    dates: np.ndarray  # out-of-sample dates
    rebalance_dates: np.ndarray
    assets: tuple[str, ...]
    month_bounds: list[tuple[int, int]]  # index ranges into ``dates``
    strategies: dict[str, StrategyResult]
    config: BacktestConfig

    def summaries(self) -> dict[str, PerformanceSummary]:
        specs = {s.label: s for s in self.config.strategies}
        return {k: v.summary(naive=specs[k].method == "Naive") for k, v in self.strategies.items()}

    def hac_matrix(self) -> tuple[list[str], np.ndarray, np.ndarray]:
        """Pairwise variance-difference statistics and p-values (row minus column)."""
        labels = list(self.strategies)
        k = len(labels)
        stat = np.zeros((k, k))
        pval = np.ones((k, k))
        for i in range(k):
            for j in range(i + 1, k):
                a = self.strategies[labels[i]].returns
                b = self.strategies[labels[j]].returns
                ok = ~(np.isnan(a) | np.isnan(b))
                if ok.sum() < 60:
                    stat[i, j] = stat[j, i] = np.nan
                    pval[i, j] = pval[j, i] = np.nan
                    continue
                res = hac_variance_test(a[ok], b[ok])
                stat[i, j], stat[j, i] = res.statistic, -res.statistic
                pval[i, j] = pval[j, i] = res.p_value
        return labels, stat, pval


def drift_weights(w, month_returns, mode: str = "daily", log_returns: bool = False) -> PortfolioWeights:
    """Weights at the end of a holding period, rescaled to sum to one.

    ``mode="daily"`` compounds the daily returns; ``"monthly"`` applies the
    arithmetic sum of the daily returns as one period return.
    """
    wv = np.asarray(getattr(w, "weights", w), dtype=float)
    r = np.asarray(month_returns, dtype=float)
    if r.ndim != 2 or r.shape[1] != wv.shape[0]:
        raise ValueError(f"returns of shape {r.shape} do not match {wv.shape[0]} weights")
    if log_returns:
        growth = np.exp(r.sum(axis=0))
    elif mode == "daily":
        growth = np.prod(1.0 + r, axis=0)
    elif mode == "monthly":
        growth = 1.0 + r.sum(axis=0)
    else:
        raise ValueError(f"unknown drift mode {mode!r}")
    value = wv * growth
    total = value.sum()
    if not total > 0:
        raise ArithmeticError("portfolio value is not positive at the end of the period")
    return PortfolioWeights(value / total, long_only=bool(np.all(wv >= 0)))


def month_schedule(panel: ReturnsPanel, tau: int, month_len: int = 21, mode: str = "blocks") -> list[tuple[int, int]]:
    """Index ranges ``[start, end)`` of the investment months.

    ``blocks``: consecutive ``month_len``-day blocks after the first ``tau``
    days, dropping a trailing partial block. ``calendar``: calendar months
    whose first trading day has at least ``tau`` days of history.
    """
    t = panel.T
    if mode == "blocks":
        m = (t - tau) // month_len
        return [(tau + k * month_len, tau + (k + 1) * month_len) for k in range(max(m, 0))]
    if mode == "calendar":
        months = panel.dates.astype("datetime64[M]")
        starts = [0] + [i for i in range(1, t) if months[i] != months[i - 1]]
        bounds = list(zip(starts, starts[1:] + [t]))
        return [(s, e) for s, e in bounds if s >= tau and e - s >= 2]
    raise ValueError(f"unknown month mode {mode!r}")


def _run_month(panel: ReturnsPanel, spec: StrategySpec, cfg: BacktestConfig, start: int, end: int):
    x = panel.values[start - cfg.tau : start]
    if spec.method == "Naive":
        return equal_weights(panel.n).weights, None, None
    family = get_family(spec.method, cfg.grids)
    if spec.mode == "original":
        est = family.original(x)
        param = est.parameter
    else:
        scheme = make_folds(cfg.tau, cfg.cv_folds, cfg.cv_train, cfg.cv_test)
        if spec.mode == "cv1":
            crit = SelectionCriterion.sfe()
        else:
            crit = SelectionCriterion.portfolio_variance(cfg.portfolio_rule, cfg.cv_variance)
        grid = np.asarray(spec.grid) if spec.grid is not None else family.default_grid(x)
        res = cv_select(x, family, grid, scheme, crit, realized_scale=cfg.realized_scale)
        param = res.best_parameter
        est = family.fit(x, param)
    if cfg.jitter and cfg.portfolio_rule == "GMV":
        from .portfolio import gmv_weights

        w = gmv_weights(est, jitter=True).weights
    else:
        w = portfolio_weights_for(est, cfg.portfolio_rule)
    return w, param, est.matrix


def run_backtest(panel: ReturnsPanel, config: BacktestConfig, threads: int = 1) -> BacktestResult:
    """Monthly-rebalanced out-of-sample evaluation of every strategy in ``config``.

    A strategy that fails in some month gets a gap (nan returns, ``None``
    weights) for that month; the other strategies are unaffected.
    """
    if not config.strategies:
        raise ValueError("no strategies configured")
    bounds = month_schedule(panel, config.tau, config.month_len, config.month_mode)
    if not bounds:
        raise ValueError(
            f"panel of {panel.T} days is too short: need at least {config.tau + config.month_len}"
        )
    first = bounds[0][0]
    last = bounds[-1][1]
    oos_dates = panel.dates[first:last]
    tasks = [(spec, k, s, e) for spec in config.strategies for k, (s, e) in enumerate(bounds)]

    def run(task):
        spec, k, s, e = task
        try:
            return _run_month(panel, spec, config, s, e)
        except (LinAlgFailure, ValueError, ArithmeticError) as exc:
            log.warning("%s failed in month %d: %s", spec.label, k, exc)
            return exc

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(run, tasks))
    else:
        outcomes = [run(t) for t in tasks]

    realized = [realized_covariance(panel.values[s:e], config.realized_scale) for s, e in bounds]
    results: dict[str, StrategyResult] = {}
    nm = len(bounds)
    for i, spec in enumerate(config.strategies):
        rets = np.full(last - first, np.nan)
        sr = StrategyResult(spec.label, rets, [None] * nm, [None] * nm, [None] * nm, [None] * nm, realized)
        for k, (s, e) in enumerate(bounds):
            out = outcomes[i * nm + k]
            if isinstance(out, Exception):
                sr.gaps[k] = f"{type(out).__name__}: {out}"
                continue
            w, param, est = out
            y = panel.values[s:e]
            try:
                drifted = drift_weights(w, y, config.drift, config.log_returns).weights
            except ArithmeticError as exc:
                sr.gaps[k] = f"{type(exc).__name__}: {exc}"
                continue
            rets[s - first : e - first] = y @ w
            sr.weights[k] = w
            sr.drifted[k] = drifted
            sr.parameters[k] = param
            sr.estimates[k] = est
        results[spec.label] = sr
    return BacktestResult(
        oos_dates,
        panel.dates[[s for s, _ in bounds]],
        panel.assets,
        [(s - first, e - first) for s, e in bounds],
        results,
        config,
    )
