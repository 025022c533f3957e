"""Run configuration: TOML file, schema-validated, unknown keys rejected.

Only ``[data] path`` is required; everything else defaults to the standard
protocol (two-year in-sample window, 12 rolling folds, monthly rebalancing).
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Literal

import tomli
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .backtest import BacktestConfig, StrategySpec
from .estimators.families import GridSettings

__all__ = ["ConfigError", "RunConfig", "load_config", "DEFAULT_STRATEGIES"]


class ConfigError(ValueError):
    pass


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class DataSection(_Strict):
    path: str
    kind: Literal["returns", "prices"] = "returns"
    log_returns: bool = False


class BacktestSection(_Strict):
    in_sample_months: int = Field(24, ge=1)
    month_len: int = Field(21, ge=2)
    month_mode: Literal["blocks", "calendar"] = "blocks"
    portfolio_rule: Literal["GMV", "GMV_NOSHORT"] = "GMV"
    drift: Literal["daily", "monthly"] = "daily"
    jitter: bool = False


class CvSection(_Strict):
    folds: int = Field(12, ge=1)
    train: int = Field(252, ge=2)
    test: int = Field(21, ge=2)
    variance: Literal["pooled", "per_fold"] = "pooled"
    realized_scale: Literal["unscaled", "per_period"] = "unscaled"


class GridSection(_Strict):
    linear_size: int = Field(1000, ge=1)
    nonlinear_size: int = Field(1000, ge=1)
    poet_factors: tuple[int, ...] = (1, 2, 3, 4, 5, 6)
    poet_k_max: int = Field(6, ge=1)
    glasso_size: int = Field(50, ge=1)
    rho_spacing: Literal["log", "linear"] = "log"


class StrategyEntry(_Strict):
    method: str
    mode: Literal["original", "cv1", "cv2"] = "original"
    grid: tuple[float, ...] | None = None
    name: str | None = None


class OutputSection(_Strict):
    dir: str = "covcv_out"


DEFAULT_STRATEGIES: tuple[StrategyEntry, ...] = (
    StrategyEntry(method="Naive"),
    StrategyEntry(method="Sample"),
    *(
        StrategyEntry(method=m, mode=mode)
        for m in ("LW1", "LWCC", "LWNL", "POET", "GLASSO")
        for mode in ("original", "cv1", "cv2")
    ),
)


class RunConfig(_Strict):
    data: DataSection
    backtest: BacktestSection = BacktestSection()
    cv: CvSection = CvSection()
    grids: GridSection = GridSection()
    strategies: tuple[StrategyEntry, ...] = DEFAULT_STRATEGIES
    output: OutputSection = OutputSection()
    seed: int = 0

    @field_validator("strategies")
    @classmethod
    def _nonempty(cls, v):
        if not v:
            raise ValueError("at least one strategy is required")
        return v

    def run_dict(self) -> dict:
        """Everything that determines the results (the output folder does not)."""
        return self.model_dump(mode="json", exclude={"output"})

    def canonical_json(self) -> str:
        return json.dumps(self.run_dict(), sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()

    def to_backtest(self) -> BacktestConfig:
        try:
            specs = tuple(StrategySpec(s.method, s.mode, s.grid, s.name) for s in self.strategies)
            return BacktestConfig(
                strategies=specs,
                portfolio_rule=self.backtest.portfolio_rule,
                in_sample_months=self.backtest.in_sample_months,
                month_len=self.backtest.month_len,
                month_mode=self.backtest.month_mode,
                cv_folds=self.cv.folds,
                cv_train=self.cv.train,
                cv_test=self.cv.test,
                cv_variance=self.cv.variance,
                realized_scale=self.cv.realized_scale,
                drift=self.backtest.drift,
                log_returns=self.data.log_returns,
                jitter=self.backtest.jitter,
                grids=GridSettings(**self.grids.model_dump()),
                seed=self.seed,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def with_updates(self, **sections) -> RunConfig:
        """Copy with some fields of some sections replaced (re-validated)."""
        raw = self.model_dump(mode="json")
        for name, updates in sections.items():
            if isinstance(updates, dict):
                raw[name].update({k: v for k, v in updates.items() if v is not None})
            elif updates is not None:
                raw[name] = updates
        return parse_config(raw)


def parse_config(raw: dict) -> RunConfig:
    try:
        return RunConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        with path.open("rb") as fh:
            raw = tomli.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    cfg = parse_config(raw)
    data_path = Path(cfg.data.path)
    if not data_path.is_absolute():
        # relative data paths are resolved against the config file's folder
        cfg = cfg.with_updates(data={"path": str(path.parent / data_path)})
    return cfg
