import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.sparse.csgraph import connected_components
from sklearn.covariance import graphical_lasso

from covcv.estimators import (
    GlassoConvergenceError,
    glasso,
    glasso_bic,
    glasso_path,
    glasso_rho_grid,
    sample_covariance,
)
from covcv.linalg import NotPositiveDefinite

from .conftest import random_spd


def kkt_residual(s, rho, theta, w):
    """Largest violation of the optimality conditions at ``theta``, relative
    to max|s|, and how far ``w`` is from ``theta``'s inverse."""
    off = ~np.eye(s.shape[0], dtype=bool)
    g = np.linalg.inv(theta) - s
    nz = (theta != 0) & off
    viol = np.zeros_like(s)
    viol[nz] = np.abs(g[nz] - rho * np.sign(theta[nz]))
    z = (theta == 0) & off
    viol[z] = np.maximum(np.abs(g[z]) - rho, 0.0)
    inv = np.abs(w @ theta - np.eye(s.shape[0])).max()
    diag = np.abs(np.diag(g)).max()
    return max(viol.max(), diag) / np.abs(s).max(), inv


def test_rho_zero_is_inverse(rng):
    s = random_spd(rng, 8)
    theta, cov = glasso(s, 0.0)
    assert np.allclose(theta.matrix, np.linalg.inv(s), atol=1e-6)
    assert np.array_equal(cov.matrix, s)


def test_rho_zero_singular_fails():
    x = np.random.default_rng(1).standard_normal((4, 6))
    with pytest.raises(NotPositiveDefinite):
        glasso(sample_covariance(x).matrix, 0.0)


def test_large_rho_gives_diagonal(rng):
    s = random_spd(rng, 7)
    rho = np.abs(s - np.diag(np.diag(s))).max()
    theta, cov = glasso(s, rho)
    assert np.array_equal(cov.matrix, np.diag(np.diag(s)))
    assert np.array_equal(theta.matrix, np.diag(1.0 / np.diag(s)))


@pytest.mark.parametrize("s12, rho", [(0.6, 0.2), (-0.6, 0.25), (0.3, 0.5)])
def test_two_by_two_closed_form(s12, rho):
    s = np.array([[1.0, s12], [s12, 2.0]])
    theta, cov = glasso(s, rho)
    w12 = np.sign(s12) * max(abs(s12) - rho, 0.0)
    expected = np.array([[1.0, w12], [w12, 2.0]])
    assert np.allclose(cov.matrix, expected, atol=1e-8)
    assert np.allclose(theta.matrix, np.linalg.inv(expected), atol=1e-7)


def test_matches_sklearn(rng):
    for n in (5, 10):
        x = rng.standard_normal((60, n)) @ rng.standard_normal((n, n))
        s = sample_covariance(x).matrix
        rho = 0.2 * np.abs(s - np.diag(np.diag(s))).max()
        ref_cov, ref_prec = graphical_lasso(s, alpha=rho, tol=1e-10, max_iter=2000, enet_tol=1e-12)
        theta, cov = glasso(s, rho, tol=1e-10, inner_tol=1e-12)
        scale = np.abs(s).max()
        assert np.abs(cov.matrix - ref_cov).max() / scale < 1e-6
        assert np.allclose(theta.matrix, ref_prec, rtol=1e-4, atol=1e-6 * np.abs(ref_prec).max())


def test_kkt_over_random_suite():
    rng = np.random.default_rng(7)
    for trial in range(12):
        n = int(rng.integers(2, 16))
        x = rng.standard_normal((3 * n, n)) @ rng.standard_normal((n, n))
        s = sample_covariance(x).matrix
        for rho in glasso_rho_grid(s, 8):
            theta, cov = glasso(s, rho)
            kkt, inv = kkt_residual(s, rho, theta.matrix, cov.matrix)
            assert kkt < 1e-5, (trial, n, rho)
            assert inv < 1e-4  # working covariance tracks the inverse
            assert np.linalg.eigvalsh(theta.matrix).min() > 0


@given(st.integers(0, 10_000), st.integers(2, 10))
def test_screening_blocks_nested_along_grid(seed, n):
    rng = np.random.default_rng(seed)
    s = random_spd(rng, n, cond=20.0)
    path = glasso_path(s, glasso_rho_grid(s, 12))
    comps = [r[1].meta["components"] for r in path]
    assert all(a >= b for a, b in zip(comps, comps[1:]))
    for theta, _ in path:
        adj = np.abs(s) > theta.penalty
        np.fill_diagonal(adj, False)
        _, labels = connected_components(adj, directed=False)
        # exact zeros between screening blocks
        assert not theta.matrix[labels[:, None] != labels[None, :]].any()


def test_nonzero_count_can_drop_as_rho_falls():
    # The support is not monotone in rho in general; an exact reference
    # solver shows the same drop on this instance.
    s = random_spd(np.random.default_rng(293), 7, cond=20.0)
    g = glasso_rho_grid(s, 12)
    ours = [glasso(s, r)[0].n_nonzero_offdiag() for r in g[-4:-1]]
    ref = []
    for r in g[-4:-1]:
        _, p = graphical_lasso(s, alpha=r, tol=1e-12, enet_tol=1e-14, max_iter=5000)
        ref.append(int(((np.abs(p) > 1e-9) & ~np.eye(7, dtype=bool)).sum()))
    assert ours == ref == [34, 42, 40]


def test_path_matches_cold_starts(rng):
    s = random_spd(rng, 9)
    grid = glasso_rho_grid(s, 6)
    for (theta_w, cov_w), rho in zip(glasso_path(s, grid), grid):
        _, cov_c = glasso(s, rho)
        assert np.abs(cov_w.matrix - cov_c.matrix).max() < 1e-4 * np.abs(s).max()


def test_unpenalized_diagonal(rng):
    s = random_spd(rng, 6)
    _, cov = glasso(s, 0.05)
    assert np.array_equal(np.diag(cov.matrix), np.diag(s))


def test_symmetric_outputs(rng):
    s = random_spd(rng, 10)
    theta, cov = glasso(s, 0.1)
    assert np.array_equal(theta.matrix, theta.matrix.T)
    assert np.array_equal(cov.matrix, cov.matrix.T)


def test_rejects_bad_input(rng):
    s = random_spd(rng, 4)
    with pytest.raises(ValueError):
        glasso(s, -0.1)
    z = s.copy()
    z[2, :] = z[:, 2] = 0.0
    with pytest.raises(ValueError):
        glasso(z, 0.1)


def test_iteration_cap_reports_residual(rng):
    x = rng.standard_normal((30, 12)) @ rng.standard_normal((12, 12))
    s = sample_covariance(x).matrix
    with pytest.raises(GlassoConvergenceError) as info:
        glasso(s, 0.01 * np.abs(s).max(), tol=1e-14, max_sweeps=2)
    assert info.value.sweeps == 2 and 0 < info.value.residual < np.inf


def test_bic_examples():
    n = 4
    assert glasso_bic(np.eye(n), np.eye(n), np.exp(2.0)) == pytest.approx(n)
    d = np.diag([2.0, 3.0, 0.5])
    s = np.eye(3)
    assert glasso_bic(d, s, 100) == pytest.approx(-np.log(3.0) + 5.5)
    theta = np.array([[2.0, 0.3, 0.2], [0.3, 2.0, 0.0], [0.2, 0.0, 2.0]])
    base = -np.linalg.slogdet(theta)[1] + np.trace(s @ theta)
    assert glasso_bic(theta, s, 100) == pytest.approx(base + np.log(100) / 2 * 4)
    with pytest.raises(NotPositiveDefinite):
        glasso_bic(np.array([[1.0, 2.0], [2.0, 1.0]]), np.eye(2), 10)


def test_rho_grid_examples():
    s = np.array([[1.0, 0.2], [0.2, 0.5]])
    assert np.allclose(glasso_rho_grid(s, 3), [1.0, 0.1, 0.01], rtol=1e-14)
    lin = glasso_rho_grid(s, 3, spacing="linear")
    assert np.allclose(lin, [1.0, 0.505, 0.01])
    with pytest.raises(ValueError):
        glasso_rho_grid(np.zeros((2, 2)))


@given(st.integers(0, 10_000), st.floats(1e-3, 1e3), st.sampled_from(["log", "linear"]))
def test_rho_grid_endpoints_and_homogeneity(seed, alpha, spacing):
    s = random_spd(np.random.default_rng(seed), 5)
    g = glasso_rho_grid(s, 50, spacing)
    u = np.abs(s).max()
    assert g[0] == u and g[-1] == 0.01 * u
    assert np.all(np.diff(g) < 0)
    assert np.allclose(glasso_rho_grid(alpha * s, 50, spacing), alpha * g, rtol=1e-12)
