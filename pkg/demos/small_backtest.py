"""A compact rolling backtest on simulated data, then the summary table and
the pairwise HAC variance tests.

    python demos/small_backtest.py

The windows are shortened (252-day estimation, 6 folds) so it finishes in
well under a minute; the CLI with the default config runs the full-size
protocol.
"""

import numpy as np

from covcv.backtest import BacktestConfig, StrategySpec, run_backtest
from covcv.synthetic import simulate_returns

panel, _ = simulate_returns(40, 252 + 12 * 21, seed=3)
cfg = BacktestConfig(
    strategies=(
        StrategySpec("Naive"),
        StrategySpec("Sample"),
        StrategySpec("LW1"),
        StrategySpec("LW1", "cv2"),
        StrategySpec("LWNL"),
        StrategySpec("POET", "cv1"),
    ),
    in_sample_months=12,
    cv_folds=6,
    cv_train=126,
    cv_test=21,
)
res = run_backtest(panel, cfg)

print(f"{len(res.rebalance_dates)} rebalances, {len(res.dates)} out-of-sample days\n")
print(f"{'strategy':<10}{'SD':>9}{'MSFE':>12}{'TO':>8}")
for label, s in res.summaries().items():
    msfe = "" if s.msfe is None else f"{s.msfe:.3e}"
    to = "" if s.turnover is None else f"{s.turnover:.3f}"
    print(f"{label:<10}{s.sd_annualized:>9.4f}{msfe:>12}{to:>8}")

print("\nselected LW1 intensities (CV2):", np.round(res.strategies["LW1-CV2"].parameters, 3))

labels, stat, pval = res.hac_matrix()
print("\nHAC p-values, row vs column (low means the variances differ):")
print(" " * 10 + "".join(f"{l:>9}" for l in labels))
for l, row in zip(labels, pval):
    print(f"{l:<10}" + "".join(f"{p:>9.3f}" for p in row))
