import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from covcv.estimators import CovarianceEstimate
from covcv.linalg import EigenDecomposition, NotPositiveDefinite
from covcv.portfolio import (
    PortfolioWeights,
    QPIterationLimit,
    equal_weights,
    gmv_noshort_weights,
    gmv_weights,
    noshort_kkt_residual,
    portfolio_returns,
)

from .conftest import random_spd


def simplex_grid(n, step):
    k = int(round(1 / step))
    for c in itertools.product(range(k + 1), repeat=n - 1):
        if sum(c) <= k:
            yield np.array([*c, k - sum(c)]) / k


def test_gmv_examples():
    assert np.allclose(gmv_weights(np.eye(5)).weights, 0.2)
    assert np.allclose(gmv_weights(np.diag([1.0, 4.0])).weights, [0.8, 0.2], atol=1e-15)


def test_gmv_beats_random_budgets(rng):
    s = random_spd(rng, 6)
    w = gmv_weights(s).weights
    v = rng.standard_normal((1000, 6))
    v /= v.sum(axis=1, keepdims=True)
    assert np.all(np.einsum("ij,jk,ik->i", v, s, v) >= w @ s @ w - 1e-14)


@given(st.integers(0, 10_000), st.integers(1, 30))
def test_gmv_first_order_conditions(seed, n):
    s = random_spd(np.random.default_rng(seed), n, cond=1e3)
    w = gmv_weights(s).weights
    g = s @ w
    assert np.abs(g - g.mean()).max() <= 1e-8 * np.abs(g).max()
    assert abs(w.sum() - 1) <= 1e-10


def test_gmv_uses_eigendecomposition(rng):
    s = random_spd(rng, 7)
    lam, v = np.linalg.eigh(s)
    est = CovarianceEstimate(None, "LWNL", -0.35, eig=EigenDecomposition(lam, v))
    assert np.allclose(gmv_weights(est).weights, gmv_weights(s).weights, atol=1e-12)


def test_gmv_singular_fails_unless_jitter():
    s = np.ones((3, 3))
    with pytest.raises(NotPositiveDefinite):
        gmv_weights(s)
    est = CovarianceEstimate(s + np.diag([0.0, 0.0, 0.0]), "Sample")
    w = gmv_weights(est, jitter=True)
    assert abs(w.weights.sum() - 1) < 1e-10
    assert est.meta["jitter"] == pytest.approx(1e-10)


def test_noshort_examples():
    # [[1, .9], [.9, .5]] is indefinite, so it is refused outright
    with pytest.raises(NotPositiveDefinite):
        gmv_noshort_weights(np.array([[1.0, 0.9], [0.9, 0.5]]))
    s = np.array([[1.0, 0.9], [0.9, 0.85]])
    assert gmv_weights(s).weights[0] < 0
    w = gmv_noshort_weights(s).weights
    assert np.array_equal(w, [0.0, 1.0])
    grid = list(simplex_grid(2, 1e-3))
    best = min(grid, key=lambda v: v @ s @ v)
    assert np.abs(w - best).max() <= 1e-3
    assert np.allclose(gmv_noshort_weights(np.eye(4)).weights, 0.25)


def test_noshort_equals_gmv_when_inactive(rng):
    s = np.diag(rng.uniform(1, 3, 6))
    assert np.array_equal(gmv_noshort_weights(s).weights, gmv_weights(s).weights)


GRIDS = {n: np.array(list(simplex_grid(n, 1e-3))) for n in (2, 3)}


def test_noshort_matches_brute_force():
    rng = np.random.default_rng(21)
    for _ in range(50):
        n = int(rng.integers(2, 4))
        s = random_spd(rng, n, cond=30.0) + 0.5 * np.outer(*[rng.standard_normal(n)] * 2)
        w = gmv_noshort_weights(s).weights
        grid = GRIDS[n]
        vals = np.einsum("ij,jk,ik->i", grid, s, grid)
        assert w @ s @ w <= vals.min() + 1e-12
        assert np.abs(w - grid[vals.argmin()]).max() <= 1e-3


def test_noshort_kkt_certificate_random():
    rng = np.random.default_rng(22)
    for _ in range(200):
        n = int(rng.integers(2, 51))
        f = rng.standard_normal((n, 3))
        s = f @ f.T + np.diag(rng.uniform(0.05, 1.0, n))
        w = gmv_noshort_weights(s)
        assert w.long_only and np.all(w.weights >= 0)
        assert noshort_kkt_residual(s, w.weights) <= 1e-8 * np.abs(s).max()


def test_noshort_iteration_cap():
    rng = np.random.default_rng(3)
    b = rng.uniform(0.5, 1.5, 30)
    s = np.outer(b, b) + np.diag(rng.uniform(0.01, 0.05, 30))
    assert np.sum(gmv_weights(s).weights < 0) > 2
    with pytest.raises(QPIterationLimit):
        gmv_noshort_weights(s, max_iter=1)


@given(st.integers(0, 10_000), st.integers(2, 12), st.floats(1e-4, 1e4))
def test_scale_invariance(seed, n, alpha):
    rng = np.random.default_rng(seed)
    f = rng.standard_normal((n, 2))
    s = f @ f.T + np.diag(rng.uniform(0.1, 1.0, n))
    for solve in (gmv_weights, gmv_noshort_weights):
        assert np.allclose(solve(alpha * s).weights, solve(s).weights, rtol=0, atol=1e-9)


def test_equal_weights():
    assert np.array_equal(equal_weights(1).weights, [1.0])
    assert np.array_equal(equal_weights(4).weights, [0.25] * 4)
    for n in (3, 7, 100):
        w = equal_weights(n)
        assert abs(w.weights.sum() - 1) <= 1e-10 and w.long_only
    with pytest.raises(ValueError):
        equal_weights(0)


def test_weights_invariants():
    with pytest.raises(ValueError):
        PortfolioWeights(np.array([0.5, 0.6]))
    with pytest.raises(ValueError):
        PortfolioWeights(np.array([1.5, -0.5]), long_only=True)
    with pytest.raises(ValueError):
        PortfolioWeights(np.array([np.nan, 1.0]))


def test_portfolio_returns(rng):
    x = rng.standard_normal((10, 1))
    r = portfolio_returns(equal_weights(2), np.hstack([x, x]))
    assert np.allclose(r, x[:, 0], atol=1e-15)
    y = rng.standard_normal((10, 3))
    assert np.array_equal(portfolio_returns(np.array([1.0, 0.0, 0.0]), y), y[:, 0])
    w = np.array([0.2, 0.5, 0.3])
    assert np.allclose(portfolio_returns(w, y), [sum(w[j] * y[t, j] for j in range(3)) for t in range(10)])
    with pytest.raises(ValueError):
        portfolio_returns(w, y[:, :2])
