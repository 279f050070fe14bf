import numpy as np
import pytest

from affinity.core import Coupling, DiscreteMarginal
from affinity.schrodinger import solve_ipfp
from affinity.welfare import (
    _center_scores_dense,
    evaluate_welfare,
    fisher_information,
    score_functions,
)

from conftest import hermite_marginal, random_marginal

T_SIGMA_1 = np.sqrt(1.25) - 0.5


def centered_marginal(rng, m, d=1):
    support = rng.normal(size=(m, d))
    w = rng.dirichlet(np.ones(m))
    support -= w @ support  # weighted mean zero per column
    return DiscreteMarginal(w, support)


def product_coupling(p, q):
    return Coupling(np.outer(p.weights, q.weights), p, q)


def full_scores(coupling, scores):
    """Materialize D_ij(x, y) for small instances."""
    x = coupling.row_marginal.support
    y = coupling.col_marginal.support
    xy = (x[:, :, None, None] * y.T[None, None, :, :]).transpose(0, 3, 1, 2)
    xy = xy.reshape(x.shape[0], y.shape[0], -1)
    return xy - scores.alpha[:, None, :] - scores.beta[None, :, :]


class TestEvaluateWelfare:
    def test_zero_affinity_independence(self):
        rng = np.random.default_rng(0)
        p = centered_marginal(rng, 10, 2)
        q = centered_marginal(rng, 8, 2)
        ev = evaluate_welfare(np.zeros((2, 2)), p, q)
        assert np.max(np.abs(ev.gradient)) < 1e-9
        pi = np.outer(p.weights, q.weights)
        entropy = -float(np.sum(pi * np.log(pi)))
        assert ev.value == pytest.approx(entropy, abs=1e-8)

    def test_gaussian_predicted_covariance(self, gauss_grid):
        ev = evaluate_welfare(np.array([[1.0]]), gauss_grid, gauss_grid)
        assert ev.gradient[0, 0] == pytest.approx(T_SIGMA_1, abs=1e-3)

    def test_finite_difference_gradient(self):
        rng = np.random.default_rng(1)
        p = centered_marginal(rng, 12, 2)
        q = centered_marginal(rng, 9, 2)
        b = 0.4 * rng.normal(size=(2, 2))
        ev = evaluate_welfare(b, p, q)
        h = 1e-5
        scale = np.max(np.abs(ev.gradient))
        for i in range(2):
            for j in range(2):
                e = np.zeros((2, 2))
                e[i, j] = h
                fd = (evaluate_welfare(b + e, p, q).value
                      - evaluate_welfare(b - e, p, q).value) / (2 * h)
                assert abs(fd - ev.gradient[i, j]) / scale < 1e-4

    def test_homogeneity(self):
        # W_sigma(A) = sigma * W_1(A / sigma), entropy base measure fixed
        rng = np.random.default_rng(2)
        p = centered_marginal(rng, 10)
        q = centered_marginal(rng, 10)
        a = np.array([[0.7]])
        for sigma in (0.5, 2.0):
            phi = p.support @ a @ q.support.T
            coupling, _, _ = solve_ipfp(phi, sigma, p, q)
            pi = coupling.pi
            mask = pi > 0
            w_sigma = float(np.sum(pi * phi)
                            - sigma * np.sum(pi[mask] * np.log(pi[mask])))
            w_one = evaluate_welfare(a / sigma, p, q).value
            assert w_sigma == pytest.approx(sigma * w_one, rel=1e-8)

    def test_gradient_transposes_under_swap(self):
        rng = np.random.default_rng(3)
        p = centered_marginal(rng, 9, 2)
        q = centered_marginal(rng, 7, 3)
        b = 0.3 * rng.normal(size=(2, 3))
        ev_xy = evaluate_welfare(b, p, q)
        ev_yx = evaluate_welfare(b.T, q, p)
        np.testing.assert_allclose(ev_xy.gradient, ev_yx.gradient.T, atol=1e-9)

    def test_convexity_along_segments(self):
        rng = np.random.default_rng(4)
        p = centered_marginal(rng, 8)
        q = centered_marginal(rng, 8)
        for _ in range(5):
            b1 = rng.normal(size=(1, 1))
            b2 = rng.normal(size=(1, 1))
            lam = rng.uniform(0.2, 0.8)
            mid = evaluate_welfare(lam * b1 + (1 - lam) * b2, p, q).value
            ends = (lam * evaluate_welfare(b1, p, q).value
                    + (1 - lam) * evaluate_welfare(b2, p, q).value)
            assert mid <= ends + 1e-9


class TestScoreFunctions:
    def test_independence_scores_are_raw_products(self):
        rng = np.random.default_rng(5)
        p = centered_marginal(rng, 10, 2)
        q = centered_marginal(rng, 8, 2)
        scores = score_functions(product_coupling(p, q))
        assert np.max(np.abs(scores.alpha)) < 1e-9
        assert np.max(np.abs(scores.beta)) < 1e-9

    def test_conditional_centering_property(self):
        rng = np.random.default_rng(6)
        p = centered_marginal(rng, 10, 2)
        q = centered_marginal(rng, 9, 2)
        ev = evaluate_welfare(0.4 * rng.normal(size=(2, 2)), p, q)
        scores = score_functions(ev.coupling)
        d = full_scores(ev.coupling, scores)
        pi = ev.coupling.pi
        cond_x = np.einsum("ab,abk->ak", pi, d) / pi.sum(axis=1)[:, None]
        cond_y = np.einsum("ab,abk->bk", pi, d) / pi.sum(axis=0)[:, None]
        assert np.max(np.abs(cond_x)) < 1e-9
        assert np.max(np.abs(cond_y)) < 1e-9

    def test_matches_dense_solve(self):
        rng = np.random.default_rng(7)
        p = centered_marginal(rng, 5, 1)
        q = centered_marginal(rng, 4, 2)
        ev = evaluate_welfare(0.5 * rng.normal(size=(1, 2)), p, q)
        scores = score_functions(ev.coupling)
        alpha_d, beta_d = _center_scores_dense(ev.coupling)
        # D is gauge-free even though (alpha, beta) individually are not
        d_sweep = -scores.alpha[:, None, :] - scores.beta[None, :, :]
        d_dense = -alpha_d[:, None, :] - beta_d[None, :, :]
        np.testing.assert_allclose(d_sweep, d_dense, atol=1e-9)


class TestFisherInformation:
    def test_independence_unit_variance(self):
        rng = np.random.default_rng(8)

        # unit-variance centered 1-d supports, independent coupling
        def unit_marginal():
            w = rng.dirichlet(np.ones(30))
            z = rng.normal(size=(30, 1))
            z -= w @ z
            z /= np.sqrt(w @ (z[:, 0] ** 2))
            return DiscreteMarginal(w, z)

        p = unit_marginal()
        q = unit_marginal()
        coupling = product_coupling(p, q)
        f = fisher_information(coupling)
        vx = p.weights @ (p.support[:, 0] ** 2)
        vy = q.weights @ (q.support[:, 0] ** 2)
        assert f.data[0, 0] == pytest.approx(vx * vy, abs=1e-10)
        assert f.data[0, 0] == pytest.approx(1.0, abs=1e-10)

    def test_symmetry_and_psd(self):
        rng = np.random.default_rng(9)
        p = centered_marginal(rng, 12, 2)
        q = centered_marginal(rng, 10, 2)
        ev = evaluate_welfare(0.3 * rng.normal(size=(2, 2)), p, q)
        f = fisher_information(ev.coupling)
        assert np.max(np.abs(f.data - f.data.T)) < 1e-9
        assert np.linalg.eigvalsh(f.data).min() > -1e-9

    def test_finite_difference_hessian(self):
        rng = np.random.default_rng(10)
        p = centered_marginal(rng, 10, 2)
        q = centered_marginal(rng, 8, 2)
        b = 0.3 * rng.normal(size=(2, 2))
        ev = evaluate_welfare(b, p, q)
        f = fisher_information(ev.coupling)
        h = 1e-4
        k = 4
        fd = np.zeros((k, k))
        for c in range(k):
            e = np.zeros(k)
            e[c] = h
            gp = evaluate_welfare(b + e.reshape(2, 2), p, q).gradient.reshape(-1)
            gm = evaluate_welfare(b - e.reshape(2, 2), p, q).gradient.reshape(-1)
            fd[:, c] = (gp - gm) / (2 * h)
        assert np.max(np.abs(fd - f.data)) / np.max(np.abs(f.data)) < 1e-3
