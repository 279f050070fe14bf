"""Social-gain function W1, its gradient, and its Hessian.

W1(B) is the optimal value of the entropy-regularized matching problem at
unit heterogeneity scale.  By the envelope theorem its gradient in B is
the model-predicted cross-moment matrix E_pi[X Y'], and its Hessian is the
Fisher information of the coupling — both are consumed by the estimator
and the inference modules.

The entropy term is taken relative to counting measure on the support
grid.  The additive constant this choice induces does not affect the
coupling, the gradient, or the Hessian (couplings in M(p, q) differ only
by base-measure constants), only the reported value of W1.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import xlogy

from .core import DoublyIndexedMatrix
from .errors import CenteringNotConverged
from .schrodinger import IpfpConfig, solve_ipfp


@dataclass(frozen=True)
class WelfareEvaluation:
    value: float
    gradient: np.ndarray
    coupling: object
    potentials: object
    report: object


@dataclass(frozen=True)
class ScoreFunctions:
    """Conditional-centering functions for the score of log pi.

    ``alpha`` has shape (m_x, d_x*d_y) and ``beta`` (m_y, d_x*d_y), pair
    (i, j) flattened row-major; the score is D_ij(x, y) = x_i y_j -
    alpha_ij(x) - beta_ij(y), with both conditional expectations under pi
    equal to zero.
    """

    alpha: np.ndarray
    beta: np.ndarray
    sweeps: int


def evaluate_welfare(b_matrix, p, q, cfg=None, warm_start=None):
    """W1 at parameter B with marginals (p, q); sigma normalized to 1."""
    b_matrix = np.asarray(b_matrix, dtype=float)
    phi = p.support @ b_matrix @ q.support.T
    coupling, potentials, report = solve_ipfp(
        phi, 1.0, p, q, cfg or IpfpConfig(), warm_start=warm_start
    )
    pi = coupling.pi
    value = float(np.sum(pi * phi) - np.sum(xlogy(pi, pi)))
    gradient = p.support.T @ pi @ q.support
    return WelfareEvaluation(value, gradient, coupling, potentials, report)


def _conditional_ops(coupling):
    """Row/column masses and safe conditional-expectation divisors."""
    pi = coupling.pi
    pm = pi.sum(axis=1)
    qm = pi.sum(axis=0)
    inv_p = np.divide(1.0, pm, out=np.zeros_like(pm), where=pm > 0)
    inv_q = np.divide(1.0, qm, out=np.zeros_like(qm), where=qm > 0)
    return pi, pm, qm, inv_p, inv_q


def _pair_products(a, b):
    """Per-row outer products flattened row-major: (m, d_a*d_b)."""
    return (a[:, :, None] * b[:, None, :]).reshape(a.shape[0], -1)


def score_functions(coupling, tol=1e-10, max_sweeps=5000):
    """Solve the conditional-centering equations by alternating sweeps.

    Each sweep enforces E[D | X = x] = 0 exactly and measures convergence
    by the sup-norm change of beta; the scheme is the same alternating
    skeleton as the marginal-fitting solver and converges linearly.
    """
    pi, pm, qm, inv_p, inv_q = _conditional_ops(coupling)
    x = coupling.row_marginal.support
    y = coupling.col_marginal.support

    cond_y = (pi @ y) * inv_p[:, None]          # E[Y | x], (m_x, d_y)
    cond_x = (pi.T @ x) * inv_q[:, None]        # E[X | y], (m_y, d_x)
    a0 = _pair_products(x, cond_y)              # E[x_i Y_j | x]
    b0 = _pair_products(cond_x, y)              # E[X_i y_j | y]

    k = x.shape[1] * y.shape[1]
    alpha = np.zeros((x.shape[0], k))
    beta = np.zeros((y.shape[0], k))
    for sweep in range(1, max_sweeps + 1):
        alpha = a0 - (pi @ beta) * inv_p[:, None]
        beta_new = b0 - (pi.T @ alpha) * inv_q[:, None]
        delta = float(np.max(np.abs(beta_new - beta))) if beta.size else 0.0
        beta = beta_new
        if delta < tol:
            return ScoreFunctions(alpha, beta, sweep)
    raise CenteringNotConverged(delta, iterations=max_sweeps)


def _center_scores_dense(coupling):
    """Dense linear-solve reference for score_functions (test oracle).

    Stacks the centering equations alpha + E[beta|x] = E[xy|x],
    E[alpha|y] + beta = E[xy|y] with a gauge row pinning the weighted mean
    of alpha, and solves by least squares per attribute pair.
    """
    pi, pm, qm, inv_p, inv_q = _conditional_ops(coupling)
    x = coupling.row_marginal.support
    y = coupling.col_marginal.support
    mx, my = pi.shape
    cx = pi * inv_p[:, None]                     # conditional E[.|x] operator
    cy = (pi * inv_q[None, :]).T                 # conditional E[.|y] operator
    a0 = _pair_products(x, cx @ y)
    b0 = _pair_products(cy @ x, y)
    lhs = np.zeros((mx + my + 1, mx + my))
    lhs[:mx, :mx] = np.eye(mx)
    lhs[:mx, mx:] = cx
    lhs[mx:mx + my, :mx] = cy
    lhs[mx:mx + my, mx:] = np.eye(my)
    lhs[-1, :mx] = pm
    rhs = np.vstack([a0, b0, np.zeros((1, a0.shape[1]))])
    sol = np.linalg.lstsq(lhs, rhs, rcond=None)[0]
    return sol[:mx], sol[mx:]


def fisher_information(coupling, scores=None, tol=1e-10):
    """Hessian of W1: F^{ij}_{kl} = E_pi[D_ij(X, Y) X_k Y_l].

    Assembled from three moment contractions so the (m_x, m_y, k) score
    array is never materialized.
    """
    if scores is None:
        scores = score_functions(coupling, tol=tol)
    pi = coupling.pi
    x = coupling.row_marginal.support
    y = coupling.col_marginal.support
    d_x, d_y = x.shape[1], y.shape[1]

    # E[(x_i y_j)(x_k y_l)]: contract pi against per-row second moments.
    x2 = _pair_products(x, x)                    # (m_x, d_x^2), (i,k)
    y2 = _pair_products(y, y)                    # (m_y, d_y^2), (j,l)
    t1 = x2.T @ pi @ y2
    t1 = t1.reshape(d_x, d_x, d_y, d_y).transpose(0, 2, 1, 3).reshape(
        d_x * d_y, d_x * d_y
    )

    # E[alpha_ij(x) x_k y_l] and E[beta_ij(y) x_k y_l].
    w_x = _pair_products(x, pi @ y)              # sum_y pi * x_k y_l, per x
    w_y = _pair_products(pi.T @ x, y)
    f = t1 - scores.alpha.T @ w_x - scores.beta.T @ w_y
    f = 0.5 * (f + f.T)
    return DoublyIndexedMatrix(f, d_x, d_y)
