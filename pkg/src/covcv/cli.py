"""Command-line interface.

Exit codes: 0 success, 1 estimator or strategy failure, 2 configuration or
data error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import report
from .backtest import run_backtest
from .config import ConfigError, RunConfig, load_config, parse_config
from .cross_validation import SelectionCriterion, cv_select, make_folds
from .data import DataError, load_csv, to_returns, write_csv
from .estimators.families import GridSettings, get_family
from .linalg import LinAlgFailure
from .synthetic import simulate_returns

EXIT_OK, EXIT_FAILURE, EXIT_CONFIG = 0, 1, 2

log = logging.getLogger("covcv")


class _UsageError(Exception):
    pass


def _threads(arg: int | None) -> int:
    if arg is not None:
        return max(1, arg)
    env = os.environ.get("COVCV_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise _UsageError(f"COVCV_THREADS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


def _load_returns(path, kind: str = "returns", log_returns: bool = False):
    panel = load_csv(path, kind)
    return to_returns(panel, log=log_returns) if kind == "prices" else panel


def _parse_grid(text: str | None):
    if text is None:
        return None
    try:
        return np.array([float(v) for v in text.split(",") if v.strip()])
    except ValueError:
        raise _UsageError(f"grid must be comma-separated numbers, got {text!r}") from None


def _criterion(name: str, rule: str) -> SelectionCriterion:
    if name in ("cv1", "sfe"):
        return SelectionCriterion.sfe()
    if name in ("cv2", "variance"):
        return SelectionCriterion.portfolio_variance(rule)
    raise _UsageError(f"unknown criterion {name!r}")


def _grids(args) -> GridSettings:
    return GridSettings(rho_spacing=args.rho_grid or "log")


def _tail_window(x: np.ndarray, tau: int) -> np.ndarray:
    if x.shape[0] < tau:
        raise _UsageError(f"need at least {tau} observations for the fold scheme, got {x.shape[0]}")
    return x[-tau:]


def cmd_estimate(args) -> int:
    panel = _load_returns(args.data, args.kind)
    family = get_family(args.method, _grids(args))
    x = panel.values
    try:
        if args.parameter is not None:
            est = family.fit(x, args.parameter)
        elif args.mode == "original":
            est = family.original(x)
        else:
            if not family.tunable:
                raise _UsageError(f"{family.name} has no parameter to cross-validate")
            scheme = make_folds(args.folds * args.test + args.train, args.folds, args.train, args.test)
            xin = _tail_window(x, scheme.tau)
            grid = _parse_grid(args.grid)
            grid = family.default_grid(xin) if grid is None else grid
            res = cv_select(
                xin, family, grid, scheme, _criterion(args.mode, args.rule),
                realized_scale=args.realized_scale, threads=_threads(args.threads),
            )
            est = family.fit(x, res.best_parameter)
    except (LinAlgFailure, ArithmeticError) as exc:
        print(f"error: {family.name} failed: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    report.write_matrix_csv(args.out, panel.assets, est.matrix)
    print(f"{family.name} parameter={report.fmt(est.parameter)} -> {args.out}")
    return EXIT_OK


def cmd_cv_select(args) -> int:
    panel = _load_returns(args.data, args.kind)
    family = get_family(args.method, _grids(args))
    if not family.tunable:
        raise _UsageError(f"{family.name} has no parameter to cross-validate")
    tau = args.tau if args.tau is not None else args.train + args.folds * args.test
    scheme = make_folds(tau, args.folds, args.train, args.test)
    xin = _tail_window(panel.values, tau)
    grid = _parse_grid(args.grid)
    grid = family.default_grid(xin) if grid is None else grid
    try:
        res = cv_select(
            xin, family, grid, scheme, _criterion(args.criterion, args.rule),
            realized_scale=args.realized_scale, threads=_threads(args.threads),
        )
    except (LinAlgFailure, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    if args.out:
        rows = [["parameter", *(f"fold{i}" for i in range(scheme.m)), "score"]]
        for j, g in enumerate(res.grid):
            rows.append([report.fmt(g.item()), *(report.fmt(v) for v in res.per_fold_detail[:, j]), report.fmt(res.scores[j])])
        report.atomic_write(args.out, report.csv_text(rows))
    print(report.fmt(res.best_parameter))
    return EXIT_OK


def _run_config_from_args(args) -> RunConfig:
    if args.manifest:
        try:
            with open(args.manifest, encoding="utf-8") as fh:
                manifest = json.load(fh)
            cfg = parse_config(manifest["config"])
        except (OSError, json.JSONDecodeError, KeyError) as exc:
            raise ConfigError(f"cannot replay manifest {args.manifest}: {exc}") from None
    elif args.config:
        cfg = load_config(args.config)
    elif args.data:
        cfg = parse_config({"data": {"path": args.data}})
    else:
        raise _UsageError("backtest needs --config, --manifest or --data")
    updates: dict = {}
    if args.data and (args.config or args.manifest):
        updates["data"] = {"path": args.data}
    if args.month_mode:
        updates["backtest"] = {"month_mode": args.month_mode}
    if args.realized_scale:
        updates["cv"] = {"realized_scale": args.realized_scale}
    if args.rho_grid:
        updates["grids"] = {"rho_spacing": args.rho_grid}
    if args.method:
        updates["strategies"] = [{"method": args.method, "mode": args.mode or "original"}]
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.out:
        updates["output"] = {"dir": args.out}
    return cfg.with_updates(**updates) if updates else cfg


def cmd_backtest(args) -> int:
    cfg = _run_config_from_args(args)
    bt = cfg.to_backtest()
    panel = _load_returns(cfg.data.path, cfg.data.kind, cfg.data.log_returns)
    digest = report.file_sha256(cfg.data.path)
    if args.manifest and not args.data:
        recorded = json.loads(Path(args.manifest).read_text(encoding="utf-8")).get("data_sha256")
        if recorded and recorded != digest:
            raise ConfigError(f"{cfg.data.path} differs from the data recorded in {args.manifest}")
    try:
        result = run_backtest(panel, bt, threads=_threads(args.threads))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    manifest = report.write_bundle(result, cfg, cfg.output.dir, digest)
    for line in Path(cfg.output.dir, "summary.csv").read_text().splitlines():
        print(line)
    if manifest["failures"]:
        for label, gaps in manifest["failures"].items():
            print(f"warning: {label} failed in {len(gaps)} month(s); see manifest", file=sys.stderr)
        return EXIT_FAILURE
    return EXIT_OK


def cmd_gen_synthetic(args) -> int:
    panel, _ = simulate_returns(args.n, args.t, args.seed if args.seed is not None else 0)
    write_csv(panel, args.out)
    print(f"wrote {panel.T} x {panel.n} returns to {args.out}")
    return EXIT_OK


def cmd_report(args) -> int:
    bundle = Path(args.bundle)
    if not (bundle / report.MANIFEST).is_file():
        raise _UsageError(f"{bundle} is not a report bundle (no {report.MANIFEST})")
    rows = report.plot_series(bundle)
    out = Path(args.out) if args.out else bundle / "plot_data.csv"
    report.atomic_write(out, report.csv_text(rows))
    print(f"wrote {len(rows) - 1} points to {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="covcv", description="Covariance estimation, cross-validation and GMV backtests.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def data_args(sp, required=True):
        sp.add_argument("--data", required=required, help="CSV panel: date column then one column per asset")
        sp.add_argument("--kind", choices=("returns", "prices"), default="returns")

    def cv_args(sp):
        sp.add_argument("--folds", type=int, default=12)
        sp.add_argument("--train", type=int, default=252)
        sp.add_argument("--test", type=int, default=21)
        sp.add_argument("--grid", help="comma-separated parameter values (default: the method's grid)")
        sp.add_argument("--rule", choices=("GMV", "GMV_NOSHORT"), default="GMV")
        sp.add_argument("--realized-scale", choices=("unscaled", "per_period"), default="unscaled")
        sp.add_argument("--rho-grid", choices=("log", "linear"))
        sp.add_argument("--threads", type=int)

    sp = sub.add_parser("estimate", help="write one covariance estimate as CSV")
    data_args(sp)
    sp.add_argument("--method", required=True)
    sp.add_argument("--parameter", type=float, help="explicit parameter (default: the method's own rule)")
    sp.add_argument("--mode", choices=("original", "cv1", "cv2"), default="original")
    sp.add_argument("--out", required=True)
    cv_args(sp)
    sp.set_defaults(func=cmd_estimate)

    sp = sub.add_parser("cv-select", help="cross-validate a method's parameter on the trailing window")
    data_args(sp)
    sp.add_argument("--method", required=True)
    sp.add_argument("--criterion", choices=("cv1", "cv2", "sfe", "variance"), default="cv1")
    sp.add_argument("--tau", type=int, help="window length (default: train + folds * test)")
    sp.add_argument("--out", help="write the grid x fold score table here")
    cv_args(sp)
    sp.set_defaults(func=cmd_cv_select)

    sp = sub.add_parser("backtest", help="run the rolling backtest and write a report bundle")
    sp.add_argument("--config")
    sp.add_argument("--manifest", help="replay the run recorded in a bundle manifest")
    sp.add_argument("--data")
    sp.add_argument("--method", help="run only this method")
    sp.add_argument("--mode", choices=("original", "cv1", "cv2"))
    sp.add_argument("--out")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--threads", type=int)
    sp.add_argument("--month-mode", choices=("blocks", "calendar"))
    sp.add_argument("--realized-scale", choices=("unscaled", "per_period"))
    sp.add_argument("--rho-grid", choices=("log", "linear"))
    sp.set_defaults(func=cmd_backtest)

    sp = sub.add_parser("gen-synthetic", help="simulate one-factor returns")
    sp.add_argument("--n", type=int, default=100)
    sp.add_argument("--t", type=int, default=1260)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_gen_synthetic)

    sp = sub.add_parser("report", help="emit long-format plot data from a bundle")
    sp.add_argument("--bundle", required=True)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (_UsageError, ConfigError, DataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc.strerror or exc}: {exc.filename or ''}".rstrip(": "), file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
