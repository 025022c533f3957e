"""Fit every estimator on one simulated window and compare the GMV portfolios
each one implies against the true covariance.

    python demos/estimators_tour.py
"""

import numpy as np

from covcv.cross_validation import SelectionCriterion, cv_select, make_folds
from covcv.estimators import FAMILIES, get_family, sample_covariance
from covcv.portfolio import gmv_weights
from covcv.synthetic import simulate_returns

N, T = 60, 504
panel, truth = simulate_returns(N, T, seed=7)
x = panel.values
sigma = truth.covariance

print(f"{N} assets, {T} days (q = {N / T:.2f})")
print(f"{'estimator':<12}{'param':>10}{'true GMV vol':>15}")
oracle = gmv_weights(sigma).weights
print(f"{'(truth)':<12}{'':>10}{np.sqrt(252 * oracle @ sigma @ oracle):>15.4f}")

for name in sorted(FAMILIES):
    fam = get_family(name)
    est = fam.original(x)
    w = gmv_weights(est).weights
    p = "" if est.parameter is None else f"{est.parameter:.4g}"
    print(f"{name:<12}{p:>10}{np.sqrt(252 * w @ sigma @ w):>15.4f}")

# choose the LW1 intensity by pooled out-of-sample GMV variance
scheme = make_folds(T, 12, 252, 21)
res = cv_select(x, get_family("LW1"), np.linspace(0, 1, 21), scheme, SelectionCriterion.portfolio_variance("GMV"))
w = gmv_weights(get_family("LW1").fit(x, res.best_parameter)).weights
print(f"{'LW1-CV2':<12}{res.best_parameter:>10.4g}{np.sqrt(252 * w @ sigma @ w):>15.4f}")
print(f"sample covariance condition number: {np.linalg.cond(sample_covariance(x).matrix):.3g}")
