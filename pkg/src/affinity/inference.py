"""Asymptotic covariances for the fitted model and the rank test for the
number of sorting dimensions.

The fitted parameter (at unit heterogeneity scale) is asymptotically
normal with covariance the inverse Fisher information, independent of the
sampling noise in the per-side variance matrices.  The delta method then
yields the covariance V of the rescaled affinity matrix
Theta = S_X^{1/2} B S_Y^{1/2}, which feeds a chi-squared test of
rank(Theta) <= p built from the corner blocks of Theta's singular value
decomposition.
"""

from dataclasses import dataclass

import numpy as np
from scipy.stats import chi2

from .core import DoublyIndexedMatrix
from .errors import SingularCornerBlock, SingularFisher, SingularOmega
from .welfare import fisher_information


@dataclass(frozen=True)
class AsymptoticCovariance:
    f: DoublyIndexedMatrix
    f_inv: DoublyIndexedMatrix
    k_xx: np.ndarray
    k_xy: np.ndarray
    k_yy: np.ndarray
    t_xy: np.ndarray
    t_x: np.ndarray
    t_y: np.ndarray
    v_theta: DoublyIndexedMatrix
    theta: np.ndarray
    b_std: np.ndarray


@dataclass(frozen=True)
class RankTestResult:
    p: int
    statistic: float
    df: int
    p_value: float
    t_vec: np.ndarray
    omega: np.ndarray
    degenerate: bool = False


def _fourth_moment_blocks(x, y):
    """Covariances of squared attributes across couples (population 1/n).

    Only per-attribute variances are random in the diagonal scale
    matrices, so each block is indexed by single attributes: e.g.
    k_xy[i, k] = cov(X_i^2, Y_k^2).
    """
    x2 = x**2
    y2 = y**2
    n = x.shape[0]
    mx2 = x2.mean(axis=0)
    my2 = y2.mean(axis=0)
    k_xx = x2.T @ x2 / n - np.outer(mx2, mx2)
    k_yy = y2.T @ y2 / n - np.outer(my2, my2)
    k_xy = x2.T @ y2 / n - np.outer(mx2, my2)
    return k_xx, k_xy, k_yy


def _model_fourth_moment_blocks(coupling):
    pi = coupling.pi
    x2 = coupling.row_marginal.support ** 2
    y2 = coupling.col_marginal.support ** 2
    pw = pi.sum(axis=1)
    qw = pi.sum(axis=0)
    mx2 = pw @ x2
    my2 = qw @ y2
    k_xx = x2.T @ (pw[:, None] * x2) - np.outer(mx2, mx2)
    k_yy = y2.T @ (qw[:, None] * y2) - np.outer(my2, my2)
    k_xy = x2.T @ pi @ y2 - np.outer(mx2, my2)
    return k_xx, k_xy, k_yy


def asymptotic_covariance(sample, model, coupling, use_model_moments=False,
                          centering_tol=1e-10):
    """Delta-method covariance of Theta = S_X^{1/2} B S_Y^{1/2}.

    ``model`` supplies B (the unit-scale parametrization); ``coupling`` is
    its converged equilibrium.  Fourth moments default to the empirical
    couple distribution; set ``use_model_moments`` to evaluate them under
    the model coupling instead.
    """
    b = model.b_matrix
    d_x, d_y = b.shape
    fisher = fisher_information(coupling, tol=centering_tol)
    eigvals = np.linalg.eigvalsh(fisher.data)
    if eigvals[0] < 1e-10 * max(eigvals[-1], 1.0):
        raise SingularFisher(float(eigvals[0]))
    f_inv = DoublyIndexedMatrix(np.linalg.inv(fisher.data), d_x, d_y)

    sx = sample.x.var(axis=0)
    sy = sample.y.var(axis=0)
    sx_half = np.sqrt(sx)
    sy_half = np.sqrt(sy)
    theta = sx_half[:, None] * b * sy_half[None, :]

    # Linearization dTheta = T_XY dvec(B) + T_X d(diag S_X) + T_Y d(diag S_Y).
    t_xy = np.kron(np.diag(sx_half), np.diag(sy_half))
    m_right = b * sy_half[None, :]        # A S_Y^{1/2}, scaled rows below
    m_left = sx_half[:, None] * b         # S_X^{1/2} A
    t_x = np.zeros((d_x * d_y, d_x))
    t_y = np.zeros((d_x * d_y, d_y))
    for i in range(d_x):
        for j in range(d_y):
            r = i * d_y + j
            t_x[r, i] = m_right[i, j] / (2.0 * sx_half[i])
            t_y[r, j] = m_left[i, j] / (2.0 * sy_half[j])

    if use_model_moments:
        k_xx, k_xy, k_yy = _model_fourth_moment_blocks(coupling)
    else:
        k_xx, k_xy, k_yy = _fourth_moment_blocks(sample.x, sample.y)

    v = (
        t_xy @ f_inv.data @ t_xy.T
        + t_x @ k_xx @ t_x.T
        + t_y @ k_yy @ t_y.T
        + t_x @ k_xy @ t_y.T
        + t_y @ k_xy.T @ t_x.T
    )
    v = 0.5 * (v + v.T)
    b_std = np.sqrt(np.diag(f_inv.data) / sample.n).reshape(d_x, d_y)
    return AsymptoticCovariance(
        fisher, f_inv, k_xx, k_xy, k_yy, t_xy, t_x, t_y,
        DoublyIndexedMatrix(v, d_x, d_y), theta, b_std,
    )


def _sym_sqrt(m):
    w, q = np.linalg.eigh(m)
    w = np.clip(w, 0.0, None)
    return (q * np.sqrt(w)[None, :]) @ q.T


def rank_test(theta_hat, v_theta, n, p):
    """Chi-squared test of H0: rank(Theta) <= p.

    Forms the minimum-singular-value block T_p from the corner blocks of
    Theta's SVD, with covariance obtained by sandwiching V between the
    orthogonal complements of the top-p singular subspaces.
    """
    theta_hat = np.asarray(theta_hat, dtype=float)
    d_x, d_y = theta_hat.shape
    d = min(d_x, d_y)
    if not 1 <= p <= d - 1:
        raise ValueError(f"p must be in [1, {d - 1}]")
    w, lam, zt = np.linalg.svd(theta_hat)
    z = zt.T
    w22 = w[p:, p:]
    z22 = z[p:, p:]
    for name, block in (("left", w22), ("right", z22)):
        if np.linalg.svd(block, compute_uv=False)[-1] < 1e-10:
            raise SingularCornerBlock(f"{name} corner block numerically singular")
    a_perp = w[:, p:] @ np.linalg.inv(w22) @ _sym_sqrt(w22 @ w22.T)
    b_perp = z[:, p:] @ np.linalg.inv(z22) @ _sym_sqrt(z22 @ z22.T)
    t_p = a_perp.T @ theta_hat @ b_perp
    t_vec = t_p.reshape(-1)

    # Row-major vec(M Theta N) = kron(M, N') vec(Theta).
    g = np.kron(a_perp.T, b_perp.T)
    vt = v_theta.data if isinstance(v_theta, DoublyIndexedMatrix) else np.asarray(v_theta)
    omega = g @ vt @ g.T
    omega = 0.5 * (omega + omega.T)
    degenerate = False
    try:
        sol = np.linalg.solve(omega, t_vec)
        if not np.all(np.isfinite(sol)):
            raise np.linalg.LinAlgError
    except np.linalg.LinAlgError:
        degenerate = True
        sol = np.linalg.pinv(omega) @ t_vec
        if not np.all(np.isfinite(sol)):
            raise SingularOmega("covariance of T_p is singular") from None
    statistic = float(n * t_vec @ sol)
    df = (d_x - p) * (d_y - p)
    p_value = float(chi2.sf(statistic, df))
    return RankTestResult(p, statistic, df, p_value, t_vec, omega, degenerate)


def sorting_dimension(sample, model, coupling, alpha=0.05,
                      use_model_moments=False):
    """Smallest rank not rejected at level ``alpha`` (d if all rejected)."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must be in (0, 1)")
    cov = asymptotic_covariance(sample, model, coupling,
                                use_model_moments=use_model_moments)
    d = min(sample.d_x, sample.d_y)
    for p in range(1, d):
        result = rank_test(cov.theta, cov.v_theta, sample.n, p)
        if result.p_value >= alpha:
            return p
    return d
