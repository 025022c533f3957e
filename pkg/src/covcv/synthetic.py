"""Simulated daily returns from a one-factor model with heterogeneous noise."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import ReturnsPanel

__all__ = ["FactorModel", "one_factor_model", "simulate_returns", "business_days"]


@dataclass(frozen=True)
class FactorModel:
    betas: np.ndarray
    factor_sd: float
    noise_sd: np.ndarray

    @property
    def covariance(self) -> np.ndarray:
        b = self.betas
        return self.factor_sd**2 * np.outer(b, b) + np.diag(self.noise_sd**2)


def one_factor_model(
    n: int,
    rng: np.random.Generator,
    *,
    factor_sd: float = 0.01,
    beta_range: tuple[float, float] = (0.5, 1.5),
    noise_range: tuple[float, float] = (0.01, 0.025),
) -> FactorModel:
    """Random betas and idiosyncratic volatilities drawn uniformly."""
    if n < 1:
        raise ValueError("need at least one asset")
    betas = rng.uniform(*beta_range, size=n)
    noise = rng.uniform(*noise_range, size=n)
    return FactorModel(betas, float(factor_sd), noise)


def business_days(start: str, count: int) -> np.ndarray:
    first = np.busday_offset(np.datetime64(start, "D"), 0, roll="forward")
    return np.busday_offset(first, np.arange(count)).astype("datetime64[D]")


def simulate_returns(
    n: int = 100,
    t: int = 1260,
    seed: int = 0,
    *,
    model: FactorModel | None = None,
    start: str = "2000-01-03",
) -> tuple[ReturnsPanel, FactorModel]:
    """Gaussian daily returns ``beta * f_t + e_t`` with ``Var(e_it) = noise_sd_i**2``.

    The model (unless given) and the draws both come from ``seed``, so a
    seed fully determines the panel.
    """
    if t < 2:
        raise ValueError("need at least two days")
    rng = np.random.default_rng(seed)
    model = model or one_factor_model(n, rng)
    n = model.betas.size
    f = rng.standard_normal(t) * model.factor_sd
    e = rng.standard_normal((t, n)) * model.noise_sd
    values = f[:, None] * model.betas[None, :] + e
    assets = tuple(f"A{i:03d}" for i in range(n))
    return ReturnsPanel(business_days(start, t), assets, values), model
