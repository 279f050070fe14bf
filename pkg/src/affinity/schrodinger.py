"""Entropy-regularized matching equilibrium via iterative proportional fitting.

The equilibrium coupling has the form pi = exp((Phi - a - b) / sigma), where
the potentials (a, b) are pinned down by the two marginal constraints.  The
solver alternates marginal rescalings of the kernel K = exp(Phi / sigma) in
two phases:

* a log-domain phase (the compiled sweep kernel) that is robust to the
  huge dynamic ranges arising when sigma is small;
* once the iterate's log-range is modest, a multiplicative phase driven by
  BLAS matrix-vector products, with scalings absorbed back into the kernel
  whenever they drift towards overflow.

Convergence is measured as the sup-norm violation of the row-marginal
constraint evaluated after the column update (columns are then exact by
construction).
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import Coupling, Potentials
from .errors import NotConverged, NumericalOverflow, SupportPointNotFound

# Switch to the multiplicative phase once max log pi is below this, so that
# exp() of kernel entries stays far from overflow.
_LOG_RANGE_SAFE = 30.0
# Absorb multiplicative scalings into the kernel beyond this magnitude.
_ABSORB_AT = 1e60


@dataclass(frozen=True)
class IpfpConfig:
    tol: float = 1e-10
    max_iter: int = 10000
    log_domain: bool = True

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


@dataclass(frozen=True)
class IterationReport:
    iterations: int
    final_error: float
    converged: bool
    backend: str


def _log_weights(w):
    with np.errstate(divide="ignore"):
        return np.log(w)


def _safe_div(num, den):
    out = np.zeros_like(num)
    np.divide(num, den, out=out, where=(num > 0) & (den > 0))
    return out


def solve_ipfp(phi, sigma, p, q, cfg=None, warm_start=None):
    """Solve for the equilibrium coupling of joint utility ``phi``.

    Parameters
    ----------
    phi : (m_x, m_y) array of joint utilities on the support grid.
    sigma : positive heterogeneity scale.
    p, q : DiscreteMarginal for the two sides.
    cfg : IpfpConfig.
    warm_start : optional Potentials from a nearby problem.

    Returns (Coupling, Potentials, IterationReport).
    """
    cfg = cfg or IpfpConfig()
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    phi = np.ascontiguousarray(phi, dtype=float)
    if phi.shape != (p.m, q.m):
        raise ValueError(f"phi shape {phi.shape} does not match marginals")
    logk = phi / sigma
    if not np.all(np.isfinite(logk)):
        raise ValueError("phi must be finite")
    logp = _log_weights(p.weights)
    logq = _log_weights(q.weights)

    if warm_start is not None:
        u = np.ascontiguousarray(-warm_start.a / sigma)
        v = np.ascontiguousarray(-warm_start.b / sigma)
    else:
        u = np.zeros(p.m)
        v = np.zeros(q.m)

    if not cfg.log_domain:
        return _solve_naive(logk, p, q, sigma, cfg)

    err = np.inf
    it = 0
    converged = False

    # Log-domain sweeps drive (and always finish) the iteration; once the
    # iterate's dynamic range is safe, an inner multiplicative phase does
    # the bulk of the work, after which the log sweep re-verifies the
    # error with exact handling of underflowing tail weights.
    while it < cfg.max_iter:
        err, max_logpi = _kernels.log_sweep(logk, logp, logq, u, v)
        it += 1
        if err < cfg.tol:
            converged = True
            break
        if max_logpi < _LOG_RANGE_SAFE and it < cfg.max_iter:
            u, v, err, it = _multiplicative_phase(
                logk, p.weights, q.weights, u, v, cfg, it
            )
    if not converged:
        raise NotConverged(err, iterations=it)

    logpi = logk + u[:, None] + v[None, :]
    pi = np.exp(logpi)
    coupling = Coupling(pi, p, q)
    potentials = _normalized_potentials(u, v, sigma, p.weights)
    report = IterationReport(it, err, True, _kernels.BACKEND)
    return coupling, potentials, report


def _multiplicative_phase(logk, pw, qw, u, v, cfg, it):
    """BLAS-driven Sinkhorn updates on the absorbed kernel exp(logk+u+v).

    Runs until the row-marginal error is below tolerance or the budget is
    spent, absorbing the scalings back into (u, v) whenever they grow
    large.  The caller re-verifies the returned iterate in log domain.
    """
    kt = np.exp(logk + u[:, None] + v[None, :])
    alpha = np.ones(pw.shape[0])
    beta = np.ones(qw.shape[0])
    err = np.inf
    while it < cfg.max_iter:
        alpha = _safe_div(pw, kt @ beta)
        beta = _safe_div(qw, kt.T @ alpha)
        it += 1
        row_mass = alpha * (kt @ beta)
        err = float(np.max(np.abs(row_mass - pw)))
        if err < cfg.tol:
            break
        if max(alpha.max(initial=0.0), beta.max(initial=0.0)) > _ABSORB_AT:
            with np.errstate(divide="ignore"):
                u = u + np.log(alpha)
                v = v + np.log(beta)
            kt = np.exp(logk + u[:, None] + v[None, :])
            alpha = np.ones(pw.shape[0])
            beta = np.ones(qw.shape[0])
    with np.errstate(divide="ignore"):
        u = u + np.log(alpha)
        v = v + np.log(beta)
    return np.ascontiguousarray(u), np.ascontiguousarray(v), err, it


def _solve_naive(logk, p, q, sigma, cfg):
    """Plain multiplicative IPFP on exp(phi/sigma), no stabilization."""
    with np.errstate(over="raise"):
        try:
            k = np.exp(logk)
        except FloatingPointError:
            raise NumericalOverflow(
                "exp(phi/sigma) overflows; enable log_domain"
            ) from None
    alpha = np.ones(p.m)
    beta = np.ones(q.m)
    err = np.inf
    for it in range(1, cfg.max_iter + 1):
        with np.errstate(over="raise"):
            try:
                alpha = _safe_div(p.weights, k @ beta)
                beta = _safe_div(q.weights, k.T @ alpha)
            except FloatingPointError:
                raise NumericalOverflow(
                    "scaling overflow in plain IPFP; enable log_domain"
                ) from None
        row_mass = alpha * (k @ beta)
        err = float(np.max(np.abs(row_mass - p.weights)))
        if err < cfg.tol:
            pi = alpha[:, None] * k * beta[None, :]
            with np.errstate(divide="ignore"):
                u, v = np.log(alpha), np.log(beta)
            potentials = _normalized_potentials(u, v, sigma, p.weights)
            return Coupling(pi, p, q), potentials, IterationReport(it, err, True, "naive")
    raise NotConverged(err, iterations=cfg.max_iter)


def _normalized_potentials(u, v, sigma, p_weights):
    """Map log scalings to potentials a = -sigma*u, b = -sigma*v, with the
    gauge fixed by a zero weighted mean of ``a`` on the x side."""
    a = -sigma * u
    b = -sigma * v
    mask = p_weights > 0
    shift = float(np.sum(a[mask] * p_weights[mask]))
    return Potentials(a - shift, b + shift)


def log_likelihood_density(coupling, model, potentials, at):
    """log pi at a support pair: (x'Ay - a(x) - b(y)) / sigma."""
    x_vec, y_vec = (np.atleast_1d(np.asarray(t, dtype=float)) for t in at)
    ix = _find_row(coupling.row_marginal.support, x_vec)
    iy = _find_row(coupling.col_marginal.support, y_vec)
    phi = float(x_vec @ model.a_matrix @ y_vec)
    return (phi - potentials.a[ix] - potentials.b[iy]) / model.sigma


def _find_row(support, vec):
    hits = np.nonzero(np.all(support == vec[None, :], axis=1))[0]
    if hits.size == 0:
        raise SupportPointNotFound(vec)
    return int(hits[0])


def split_surplus(model, potentials, p, q):
    """Split the joint utility into the two sides' systematic payoffs.

    Returns (U, V) on the support grid with U + V = Phi and
    U - V = a(x) - b(y).
    """
    phi = model.phi(p.support, q.support)
    a = potentials.a[:, None]
    b = potentials.b[None, :]
    u = (phi + a - b) / 2.0
    v = (phi - a + b) / 2.0
    return u, v
