"""Price and return panels: loading, validation, windowing."""

from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "DataError",
    "PricePanel",
    "ReturnsPanel",
    "column_demean",
    "load_csv",
    "to_returns",
    "window",
    "write_csv",
]


class DataError(ValueError):
    """Malformed or invalid panel data."""


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class _Panel:
    dates: np.ndarray  # datetime64[D], strictly increasing
    assets: tuple[str, ...]
    values: np.ndarray  # (T, n)

    def __post_init__(self):
        dates = np.asarray(self.dates, dtype="datetime64[D]")
        values = _freeze(self.values)
        assets = tuple(str(a) for a in self.assets)
        if values.ndim != 2:
            raise DataError(f"panel values must be 2-D, got shape {values.shape}")
        t, n = values.shape
        if len(dates) != t:
            raise DataError(f"{len(dates)} dates for {t} rows")
        if len(assets) != n:
            raise DataError(f"{len(assets)} tickers for {n} columns")
        if len(set(assets)) != n:
            raise DataError("duplicate tickers")
        if n < 1:
            raise DataError("panel has no assets")
        if t > 1 and not np.all(dates[1:] > dates[:-1]):
            raise DataError("dates must be strictly increasing")
        bad = np.argwhere(~np.isfinite(values))
        if bad.size:
            i, j = bad[0]
            raise DataError(f"non-finite value at row {i}, ticker {assets[j]}")
        dates = dates.copy()
        dates.setflags(write=False)
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "assets", assets)

    @property
    def T(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]

    def __eq__(self, other):
        return (
            type(self) is type(other)
            and self.assets == other.assets
            and np.array_equal(self.dates, other.dates)
            and np.array_equal(self.values, other.values)
        )

    def __len__(self):
        return self.T


@dataclass(frozen=True, eq=False)
class ReturnsPanel(_Panel):
    """T x n simple (or log) returns indexed by trading date."""

    @property
    def returns(self) -> np.ndarray:
        return self.values

    @property
    def q(self) -> float:
        """Concentration ratio n / T."""
        return self.n / self.T


@dataclass(frozen=True, eq=False)
class PricePanel(_Panel):
    def __post_init__(self):
        super().__post_init__()
        bad = np.argwhere(self.values <= 0)
        if bad.size:
            i, j = bad[0]
            raise DataError(f"nonpositive price at row {i}, ticker {self.assets[j]}")

    @property
    def prices(self) -> np.ndarray:
        return self.values


def load_csv(path, kind: str = "returns") -> PricePanel | ReturnsPanel:
    """Read a ``date,TICKER1,TICKER2,...`` file. Rows are sorted by date."""
    if kind not in ("prices", "returns"):
        raise ValueError(f"kind must be 'prices' or 'returns', got {kind!r}")
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if len(header) < 2 or header[0].lower() != "date":
        raise DataError(f"{path}: header must start with 'date' followed by tickers")
    tickers = header[1:]
    dates, values = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise DataError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        try:
            dates.append(dt.date.fromisoformat(row[0].strip()))
        except ValueError:
            raise DataError(f"{path}:{lineno}: bad date {row[0]!r}") from None
        vals = []
        for ticker, cell in zip(tickers, row[1:]):
            cell = cell.strip()
            if not cell:
                raise DataError(f"{path}: missing value at row {lineno}, ticker {ticker}")
            try:
                v = float(cell)
            except ValueError:
                raise DataError(
                    f"{path}: non-numeric value {cell!r} at row {lineno}, ticker {ticker}"
                ) from None
            if not np.isfinite(v):
                raise DataError(f"{path}: non-finite value at row {lineno}, ticker {ticker}")
            vals.append(v)
        values.append(vals)
    if len(set(dates)) != len(dates):
        seen = set()
        dup = next(d for d in dates if d in seen or seen.add(d))
        raise DataError(f"{path}: duplicate date {dup.isoformat()}")
    order = sorted(range(len(dates)), key=dates.__getitem__)
    d = np.array([np.datetime64(dates[i], "D") for i in order], dtype="datetime64[D]")
    v = np.array([values[i] for i in order], dtype=float).reshape(len(order), len(tickers))
    cls = PricePanel if kind == "prices" else ReturnsPanel
    panel = cls(d, tuple(tickers), v)
    if kind == "returns" and panel.T < 2:
        raise DataError(f"{path}: need at least 2 rows of returns")
    return panel


def write_csv(panel: PricePanel | ReturnsPanel, path) -> None:
    """Write a panel so that :func:`load_csv` reproduces it exactly."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", *panel.assets])
        for d, row in zip(panel.dates, panel.values):
            w.writerow([str(d), *(repr(float(x)) for x in row)])


def to_returns(prices: PricePanel, log: bool = False) -> ReturnsPanel:
    """Per-period returns ``p_t / p_{t-1} - 1`` (or log ratios)."""
    if prices.T < 2:
        raise DataError("need at least two price rows")
    p = prices.values
    if np.any(p <= 0):
        raise DataError("nonpositive price")
    r = np.log(p[1:] / p[:-1]) if log else p[1:] / p[:-1] - 1.0
    return ReturnsPanel(prices.dates[1:], prices.assets, r)


def window(r: ReturnsPanel, start: int, length: int) -> ReturnsPanel:
    if start < 0 or length < 1 or start + length > r.T:
        raise IndexError(f"window [{start}, {start + length}) outside panel of {r.T} rows")
    return ReturnsPanel(r.dates[start : start + length], r.assets, r.values[start : start + length])


def column_demean(r: ReturnsPanel | np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    x = r.values if isinstance(r, _Panel) else np.asarray(r, dtype=float)
    mu = x.mean(axis=0)
    return x - mu, mu
