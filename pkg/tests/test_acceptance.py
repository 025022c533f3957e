"""Acceptance suite. Each test prints one ``ACCEPTANCE <k> PASS|FAIL`` line
(collected again in the terminal summary) and then asserts.

Criteria 4 and 5 share one set of 20 synthetic backtests (n = 100, five
years of daily returns), spread over a process pool as wide as the machine.
"""

import itertools
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np
import pytest

from covcv.backtest import BacktestConfig, StrategySpec, run_backtest
from covcv.cli import main
from covcv.cross_validation import make_folds
from covcv.data import ReturnsPanel, write_csv
from covcv.estimators import (
    build_target,
    glasso,
    glasso_path,
    glasso_rho_grid,
    linear_shrink,
    poet,
    sample_covariance,
)
from covcv.portfolio import gmv_noshort_weights, noshort_kkt_residual
from covcv.stats import hac_variance_test
from covcv.synthetic import simulate_returns

from .conftest import ACCEPTANCE_LINES, random_spd

REPLICATIONS = 20
SYNTHETIC_SPECS = (
    ("Sample", "original"),
    ("LW1", "original"),
    ("LW1", "cv1"),
    ("LW1", "cv2"),
    ("GLASSO", "original"),
    ("GLASSO", "cv2"),
)


def verdict(k: int, ok: bool, detail: str) -> None:
    line = f"ACCEPTANCE {k} {'PASS' if ok else 'FAIL'}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def simplex_grid(n, step=1e-3):
    k = int(round(1 / step))
    pts = [c for c in itertools.product(range(k + 1), repeat=n - 1) if sum(c) <= k]
    return np.array([[*c, k - sum(c)] for c in pts]) / k


def kkt_glasso(s, rho, theta):
    n = s.shape[0]
    g = np.linalg.inv(theta) - s
    off = ~np.eye(n, dtype=bool)
    nz, z = (theta != 0) & off, (theta == 0) & off
    v = np.zeros_like(s)
    v[nz] = np.abs(g[nz] - rho * np.sign(theta[nz]))
    v[z] = np.maximum(np.abs(g[z]) - rho, 0.0)
    return max(v.max(), np.abs(np.diag(g)).max()) / np.abs(s).max()


def test_criterion_1_small_oracles():
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    grids = {2: simplex_grid(2), 3: simplex_grid(3)}
    worst_qp = 0.0
    for _ in range(50):
        n = int(rng.integers(2, 4))
        s = random_spd(rng, n, cond=30.0)
        if rng.random() < 0.5:  # make short positions likely
            b = rng.uniform(0.5, 1.5, n)
            s = np.outer(b, b) + np.diag(rng.uniform(0.01, 0.2, n))
        w = gmv_noshort_weights(s).weights
        g = grids[n]
        best = g[np.einsum("ij,jk,ik->i", g, s, g).argmin()]
        worst_qp = max(worst_qp, np.abs(w - best).max())
    worst_gl = 0.0
    for _ in range(100):
        d = rng.uniform(0.1, 3.0, 2)
        s12 = rng.uniform(-0.99, 0.99) * np.sqrt(d[0] * d[1])
        s = np.array([[d[0], s12], [s12, d[1]]])
        rho = rng.uniform(0.0, 1.2) * abs(s12) + 1e-12
        theta, cov = glasso(s, rho)
        w12 = np.sign(s12) * max(abs(s12) - rho, 0.0)
        w = np.array([[d[0], w12], [w12, d[1]]])
        worst_gl = max(worst_gl, np.abs(cov.matrix - w).max(), np.abs(theta.matrix - np.linalg.inv(w)).max()
                       / np.abs(np.linalg.inv(w)).max())
    secs = time.perf_counter() - t0
    ok = worst_qp <= 1e-3 and worst_gl <= 1e-6 and secs < 60
    verdict(1, ok, f"QP vs simplex grid max|dw|={worst_qp:.2e}; 2x2 glasso max err={worst_gl:.2e}; {secs:.1f}s")


def test_criterion_2_kkt_suites():
    t0 = time.perf_counter()
    rng = np.random.default_rng(202)
    worst_gl = 0.0
    for _ in range(10):
        x = rng.standard_normal((30, 10)) @ rng.standard_normal((10, 10))
        s = sample_covariance(x).matrix
        grid = glasso_rho_grid(s, 50)
        for (theta, _), rho in zip(glasso_path(s, grid), grid):
            worst_gl = max(worst_gl, kkt_glasso(s, rho, theta.matrix))
    worst_qp = 0.0
    for _ in range(200):
        n = int(rng.integers(2, 51))
        f = rng.standard_normal((n, 3))
        s = f @ f.T + np.diag(rng.uniform(0.05, 1.0, n))
        w = gmv_noshort_weights(s).weights
        worst_qp = max(worst_qp, noshort_kkt_residual(s, w) / np.abs(s).max())
    secs = time.perf_counter() - t0
    ok = worst_gl <= 1e-5 and worst_qp <= 1e-8 and secs < 120
    verdict(2, ok, f"glasso KKT max={worst_gl:.2e} (10x10, 50-point grid); QP KKT max={worst_qp:.2e}; {secs:.1f}s")


def test_criterion_3_endpoints():
    rng = np.random.default_rng(303)
    x = rng.standard_normal((80, 12)) @ rng.standard_normal((12, 12))
    s = sample_covariance(x)
    errs = {}
    for kind in ("identity", "constant_correlation"):
        tgt = build_target(x, kind)
        errs[f"shrink0-{kind}"] = np.abs(linear_shrink(s, tgt, 0.0).matrix - s.matrix).max()
        errs[f"shrink1-{kind}"] = np.abs(linear_shrink(s, tgt, 1.0).matrix - tgt.matrix).max()
    errs["poet k=n"] = np.abs(poet(x, 12).matrix - s.matrix).max()
    errs["glasso rho=0"] = np.abs(glasso(s.matrix, 0.0)[0].matrix - np.linalg.inv(s.matrix)).max()
    ok = (
        all(errs[k] == 0.0 for k in errs if k.startswith("shrink"))
        and errs["poet k=n"] <= 1e-10
        and errs["glasso rho=0"] <= 1e-6
    )
    verdict(3, ok, ", ".join(f"{k}={v:.1e}" for k, v in errs.items()))


def _synthetic_replication(seed: int) -> dict:
    panel, _ = simulate_returns(100, 1260, seed=seed)
    cfg = BacktestConfig(tuple(StrategySpec(m, mode) for m, mode in SYNTHETIC_SPECS))
    res = run_backtest(panel, cfg)
    out = {k: (v.sd_annualized, v.msfe) for k, v in res.summaries().items()}
    out["gaps"] = sum(len(s.gaps) for s in res.strategies.values())
    return out


@pytest.fixture(scope="module")
def synthetic_runs():
    t0 = time.perf_counter()
    seeds = range(REPLICATIONS)
    workers = min(os.cpu_count() or 1, REPLICATIONS)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(_synthetic_replication, seeds))
    else:
        runs = [_synthetic_replication(s) for s in seeds]
    return runs, time.perf_counter() - t0, workers


def test_criterion_4_synthetic_ordering(synthetic_runs):
    runs, secs, workers = synthetic_runs
    sd = {k: np.array([r[k][0] for r in runs]) for k in ("Sample", "LW1", "LW1-CV2", "GLASSO", "GLASSO-CV2")}
    wins = {k: int(np.sum(sd[k] <= sd["Sample"])) for k in sd if k != "Sample"}
    glasso_ok = sd["GLASSO-CV2"].mean() <= sd["GLASSO"].mean()
    ok = all(w >= 18 for w in wins.values()) and glasso_ok
    detail = (
        ", ".join(f"{k} <= Sample in {w}/20" for k, w in wins.items())
        + f"; mean SD GLASSO-CV2={sd['GLASSO-CV2'].mean():.5f} vs GLASSO={sd['GLASSO'].mean():.5f}"
        + f"; gaps={sum(r['gaps'] for r in runs)}; {secs / 60:.1f} min on {workers} worker(s)"
    )
    verdict(4, ok, detail)


def test_criterion_5_cv1_msfe(synthetic_runs):
    runs, _, _ = synthetic_runs
    cv1 = np.array([r["LW1-CV1"][1] for r in runs])
    orig = np.array([r["LW1"][1] for r in runs])
    wins = int(np.sum(cv1 <= orig))
    verdict(5, wins >= 18, f"LW1-CV1 MSFE <= LW1 MSFE in {wins}/20 (median ratio {np.median(cv1 / orig):.4f})")


def test_criterion_6_fold_geometry():
    sch = make_folds(504, 12, 252, 21)
    ok = (
        sch.folds[0] == (range(0, 252), range(252, 273))
        and sch.folds[11] == (range(231, 483), range(483, 504))
        and len(sch.folds) == 12
    )
    verdict(6, ok, f"fold0={sch.folds[0]}, fold11={sch.folds[11]}")


def test_criterion_7_hac_size():
    t0 = time.perf_counter()
    rng = np.random.default_rng(707)
    reps, rejections = 500, 0
    for _ in range(reps):
        a, b = rng.standard_normal(5000), rng.standard_normal(5000)
        rejections += hac_variance_test(a, b).p_value < 0.05
    rate = rejections / reps
    secs = time.perf_counter() - t0
    # Monte Carlo standard error of the rate at 5%: about 1 point
    se = np.sqrt(0.05 * 0.95 / reps)
    verdict(7, 0.03 <= rate <= 0.07 and secs < 300,
            f"rejection rate {rate:.3f} over {reps} null replications (MC s.e. {se:.3f}); {secs:.1f}s")


def _bundle(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


def test_criterion_8_determinism(tmp_path):
    panel, _ = simulate_returns(20, 504 + 3 * 21, seed=808)
    data = tmp_path / "returns.csv"
    write_csv(panel, data)
    (tmp_path / "run.toml").write_text('[data]\npath = "returns.csv"\n\n[grids]\nlinear_size = 101\nnonlinear_size = 101\nglasso_size = 10\n')
    first = tmp_path / "first"
    rc0 = main(["backtest", "--config", str(tmp_path / "run.toml"), "--out", str(first), "--threads", "1"])
    manifest = first / "manifest.json"
    outs = {}
    for threads in (1, 2, 4):
        d = tmp_path / f"replay{threads}"
        outs[threads] = (main(["backtest", "--manifest", str(manifest), "--out", str(d), "--threads", str(threads)]), _bundle(d))
    ref = outs[1][1]
    same = all(b == ref for _, b in outs.values())
    strategies = json.loads(manifest.read_text())["strategies"]
    ok = rc0 == 0 and same and all(rc == 0 for rc, _ in outs.values()) and _bundle(first) == ref
    verdict(8, ok, f"{len(ref)} files x {len(strategies)} strategies identical across replays at 1, 2, 4 threads")


def test_criterion_9_no_look_ahead():
    panel, _ = simulate_returns(25, 504 + 4 * 21, seed=909)
    specs = tuple(
        StrategySpec(m, mode, grid=None)
        for m, mode in [("Naive", "original"), ("Sample", "original"), ("LW1", "cv1"), ("LWCC", "cv2"),
                        ("LWNL", "original"), ("POET", "cv1"), ("GLASSO", "original"), ("GLASSO", "cv2")]
    )
    cfg = BacktestConfig(specs)
    base = run_backtest(panel, cfg)
    checked = 0
    ok = True
    for k in range(1, 4):
        start = 504 + k * 21
        vals = panel.values.copy()
        vals[start:] = np.random.default_rng(k).normal(0, 0.05, vals[start:].shape)
        mutated = run_backtest(ReturnsPanel(panel.dates, panel.assets, vals), cfg)
        for label, sr in mutated.strategies.items():
            for t in range(k + 1):
                checked += 1
                ok &= np.array_equal(sr.weights[t], base.strategies[label].weights[t])
    verdict(9, bool(ok), f"{checked} (strategy, month) weight vectors bit-identical after perturbing later returns")
