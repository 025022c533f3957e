"""Report bundle: plain CSV tables plus a JSON manifest.

Floats are written with ``repr`` so every table reads back bit-for-bit.
Gaps (failed months, undefined statistics) are empty cells.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import re
from pathlib import Path

import numpy as np

__all__ = [
    "atomic_write",
    "csv_text",
    "file_sha256",
    "fmt",
    "load_matrix_csv",
    "plot_series",
    "read_table",
    "write_bundle",
    "write_matrix_csv",
]

MANIFEST = "manifest.json"


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    v = float(x)
    return "" if math.isnan(v) else repr(v)


def csv_text(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerows(rows)
    return buf.getvalue()


def atomic_write(path, text: str) -> None:
    """Write via a temporary sibling and rename, so readers never see a partial file."""
    path = Path(path)
    tmp = path.with_name(f".{path.name}.tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def read_table(path) -> tuple[list[str], list[str], np.ndarray]:
    """Header, first-column labels, and the remaining cells as floats (nan if empty)."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty table")
    header, body = rows[0], rows[1:]
    labels = [r[0] for r in body]
    vals = np.array(
        [[float(c) if c != "" else np.nan for c in r[1:]] for r in body], dtype=float
    ).reshape(len(body), len(header) - 1)
    return header, labels, vals


def write_matrix_csv(path, assets, matrix) -> None:
    m = np.asarray(matrix, dtype=float)
    rows = [["asset", *assets]] + [[a, *(fmt(v) for v in row)] for a, row in zip(assets, m)]
    atomic_write(path, csv_text(rows))


def load_matrix_csv(path) -> tuple[tuple[str, ...], np.ndarray]:
    header, labels, vals = read_table(path)
    if header[1:] != labels:
        raise ValueError(f"{path}: row and column labels differ")
    return tuple(labels), vals


def _safe_name(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]", "_", label)


def write_bundle(result, run_config, out_dir, data_sha256: str) -> dict:
    """Write every report table and the manifest; returns the manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    labels = list(result.strategies)
    srs = [result.strategies[k] for k in labels]
    files = {}

    rows = [["date", *labels]]
    for d, vals in zip(result.dates, zip(*(s.returns for s in srs))):
        rows.append([str(d), *(fmt(v) for v in vals)])
    files["returns.csv"] = rows

    reb = [str(d) for d in result.rebalance_dates]
    for s in srs:
        rows = [["date", *result.assets]]
        for d, w in zip(reb, s.weights):
            rows.append([d, *(fmt(v) for v in w)] if w is not None else [d, *[""] * len(result.assets)])
        files[f"weights_{_safe_name(s.label)}.csv"] = rows

    rows = [["date", *labels]]
    for k, d in enumerate(reb):
        rows.append([d, *(fmt(s.parameters[k]) for s in srs)])
    files["params.csv"] = rows

    summaries = result.summaries()
    rows = [["strategy", "MSFE", "SD", "TO"]]
    for k in labels:
        p = summaries[k]
        rows.append([k, fmt(p.msfe), fmt(p.sd_annualized), fmt(p.turnover)])
    files["summary.csv"] = rows

    hl, stat, pval = result.hac_matrix()
    files["hac.csv"] = [["strategy", *hl]] + [[a, *(fmt(v) for v in row)] for a, row in zip(hl, stat)]
    files["hac_pvalues.csv"] = [["strategy", *hl]] + [[a, *(fmt(v) for v in row)] for a, row in zip(hl, pval)]

    for name, rows in files.items():
        atomic_write(out / name, csv_text(rows))

    cfg = run_config.run_dict()
    failures = {
        s.label: [{"month": reb[k], "reason": r} for k, r in sorted(s.gaps.items())]
        for s in srs
        if s.gaps
    }
    bt = result.config
    manifest = {
        "format": 1,
        "config": cfg,
        "config_sha256": run_config.digest(),
        "data_sha256": data_sha256,
        "seed": run_config.seed,
        "flags": {
            "realized_scale": bt.realized_scale,
            "month_mode": bt.month_mode,
            "drift": bt.drift,
            "log_returns": bt.log_returns,
            "rho_spacing": bt.grids.rho_spacing,
            "cv_variance": bt.cv_variance,
            "portfolio_rule": bt.portfolio_rule,
            "jitter": bt.jitter,
            "msfe_triangle": "upper_with_diagonal",
            "hac_kernel": "parzen",
            "hac_bandwidth": "andrews_ar1_min5",
        },
        "months": len(reb),
        "out_of_sample_days": int(len(result.dates)),
        "strategies": labels,
        "failures": failures,
        "files": sorted(files),
    }
    atomic_write(out / MANIFEST, json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def plot_series(bundle_dir) -> list[list[str]]:
    """Long-format ``series,strategy,date,value`` rows for the chosen
    parameters and the cumulative out-of-sample returns."""
    b = Path(bundle_dir)
    rows = [["series", "strategy", "date", "value"]]
    header, dates, vals = read_table(b / "params.csv")
    for j, label in enumerate(header[1:]):
        for d, v in zip(dates, vals[:, j]):
            if not np.isnan(v):
                rows.append(["parameter", label, d, fmt(v)])
    header, dates, vals = read_table(b / "returns.csv")
    for j, label in enumerate(header[1:]):
        growth = np.cumprod(1.0 + np.nan_to_num(vals[:, j]))
        for d, g, v in zip(dates, growth, vals[:, j]):
            rows.append(["cumulative_return", label, d, fmt(g - 1.0 if not np.isnan(v) else None)])
    return rows
