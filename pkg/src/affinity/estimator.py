"""Affinity-matrix estimation by convex moment matching.

The estimator minimizes W1(B) - <B, Sigma_XY>, whose first-order
conditions equate the model-predicted cross moments E_pi[X Y'] with the
observed cross-covariances.  The objective is smooth and strictly convex,
so a damped Newton method with the exact Fisher-information Hessian
converges quadratically; every inner evaluation re-solves the matching
equilibrium warm-started from the previous potentials.

For large samples the empirical marginals are compressed to a capped
number of support points (exact quantile bins in one dimension, a
deterministic Lloyd clustering otherwise) before solving; the observed
cross-covariance always uses the full sample.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .core import (
    AffinityModel,
    DiscreteMarginal,
    MatchedSample,
    cross_covariance,
    empirical_marginals,
    standardize,
    variance_matrices,
)
from .errors import DegenerateData, NotConverged
from .schrodinger import IpfpConfig
from .welfare import evaluate_welfare, fisher_information, score_functions


@dataclass(frozen=True)
class FitConfig:
    moment_tol: float = 1e-6
    max_newton: int = 60
    support_cap: int = 2000
    centering_tol: float = 1e-6
    ipfp: IpfpConfig = field(default_factory=IpfpConfig)


@dataclass(frozen=True)
class FitReport:
    b_hat: np.ndarray
    objective_trace: tuple
    moment_gap: float
    iterations: int
    coupling: object
    potentials: object
    marginal_x: DiscreteMarginal
    marginal_y: DiscreteMarginal
    sigma_xy: np.ndarray
    compressed: bool
    degenerate: bool = False


def _quantile_bins(values, cap):
    """Equal-count bins of a 1-d sample; support = bin means."""
    order = np.argsort(values[:, 0], kind="stable")
    n = order.shape[0]
    bin_id = (np.arange(n) * cap) // n
    counts = np.bincount(bin_id, minlength=cap)
    sums = np.bincount(bin_id, weights=values[order, 0], minlength=cap)
    keep = counts > 0
    support = (sums[keep] / counts[keep])[:, None]
    return DiscreteMarginal(counts[keep] / n, support)


def _lloyd_bins(values, cap, iters=25):
    """Deterministic k-means compression for multivariate marginals."""
    n = values.shape[0]
    rng = np.random.default_rng(12345)
    centers = values[rng.choice(n, size=cap, replace=False)]
    for _ in range(iters):
        d2 = ((values[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        labels = d2.argmin(axis=1)
        for k in range(cap):
            mask = labels == k
            if mask.any():
                centers[k] = values[mask].mean(axis=0)
    counts = np.bincount(labels, minlength=cap)
    keep = counts > 0
    return DiscreteMarginal(counts[keep] / n, centers[keep])


def compress_marginal(values, cap):
    """Empirical marginal of ``values`` with at most ``cap`` support points."""
    values = np.asarray(values, dtype=float)
    n = values.shape[0]
    if n <= cap:
        return DiscreteMarginal(np.full(n, 1.0 / n), values)
    if values.shape[1] == 1:
        return _quantile_bins(values, cap)
    return _lloyd_bins(values, cap)


def fit_marginals(sample, cfg):
    """The two marginals actually fed to the equilibrium solver."""
    if sample.n <= cfg.support_cap:
        return empirical_marginals(sample) + (False,)
    return (
        compress_marginal(sample.x, cfg.support_cap),
        compress_marginal(sample.y, cfg.support_cap),
        True,
    )


def fit_affinity(sample, cfg=None):
    """Fit the affinity model on a standardized sample.

    Returns (AffinityModel, FitReport); the model is normalized to
    ||A||_F = 1 with sigma = 1 / ||B||_F.
    """
    cfg = cfg or FitConfig()
    sigma_xy = cross_covariance(sample)
    d_x, d_y = sample.d_x, sample.d_y
    if sample.n <= d_x * d_y:
        warnings.warn(
            f"only {sample.n} couples for {d_x * d_y} parameters", stacklevel=2
        )
    p, q, compressed = fit_marginals(sample, cfg)

    if np.all(sigma_xy == 0.0):
        # Independence: B = 0 solves the moment conditions exactly.
        ev = evaluate_welfare(np.zeros((d_x, d_y)), p, q, cfg.ipfp)
        report = FitReport(
            np.zeros((d_x, d_y)), (ev.value,), 0.0, 0, ev.coupling,
            ev.potentials, p, q, sigma_xy, compressed, degenerate=True,
        )
        return AffinityModel.from_b(report.b_hat), report

    b = sigma_xy.copy()
    trace = []
    warm = None
    ev = evaluate_welfare(b, p, q, cfg.ipfp, warm_start=warm)
    obj = ev.value - float(np.sum(b * sigma_xy))
    gap = np.inf
    for it in range(1, cfg.max_newton + 1):
        grad = ev.gradient - sigma_xy
        gap = float(np.max(np.abs(grad)))
        trace.append(obj)
        if gap < cfg.moment_tol:
            break
        fisher = fisher_information(ev.coupling, tol=cfg.centering_tol)
        try:
            step = np.linalg.solve(fisher.data, grad.reshape(-1)).reshape(d_x, d_y)
        except np.linalg.LinAlgError:
            step = grad  # near-singular Hessian: plain gradient direction
        # Backtracking line search on the convex objective.
        slope = float(np.sum(grad * step))
        t = 1.0
        warm = ev.potentials
        while True:
            b_new = b - t * step
            ev_new = evaluate_welfare(b_new, p, q, cfg.ipfp, warm_start=warm)
            obj_new = ev_new.value - float(np.sum(b_new * sigma_xy))
            if obj_new <= obj - 1e-4 * t * slope or t < 1e-8:
                break
            t *= 0.5
        b, ev, obj = b_new, ev_new, obj_new
    else:
        raise NotConverged(gap, iterations=cfg.max_newton)

    report = FitReport(
        b, tuple(trace), gap, it - 1, ev.coupling, ev.potentials,
        p, q, sigma_xy, compressed,
    )
    return AffinityModel.from_b(b), report


@dataclass(frozen=True)
class BootstrapResult:
    b_std: np.ndarray
    share_std: np.ndarray
    b_draws: np.ndarray
    share_draws: np.ndarray
    failures: tuple
    reps: int
    seed: int


def bootstrap_fit(sample, reps, seed, cfg=None):
    """Resample couples with replacement, refit, and summarize spread.

    Each replicate re-standardizes its resample and refits both the
    affinity matrix and the saliency shares, mirroring the full pipeline.
    Standard deviations use the 1/reps convention (a single replicate has
    spread 0 by definition).  Deterministic given ``seed``.
    """
    from .saliency import saliency  # local import to avoid a cycle

    if reps < 1:
        raise ValueError("reps must be >= 1")
    cfg = cfg or FitConfig()
    children = np.random.SeedSequence(seed).spawn(reps)
    b_draws, share_draws, failures = [], [], []
    for r, child in enumerate(children):
        rng = np.random.default_rng(child)
        idx = rng.integers(0, sample.n, size=sample.n)
        resample = MatchedSample(
            sample.x[idx], sample.y[idx],
            sample.attribute_names_x, sample.attribute_names_y,
        )
        try:
            std_sample, _ = standardize(resample)
            model, report = fit_affinity(std_sample, cfg)
            s_x, s_y = variance_matrices(std_sample)
            result = saliency(model, s_x, s_y)
        except Exception as exc:  # noqa: BLE001 - per-replicate failure log
            failures.append((r, repr(exc)))
            continue
        b_draws.append(report.b_hat)
        share_draws.append(result.shares)
    if not b_draws:
        raise NotConverged(np.nan, message="every bootstrap replicate failed")
    b_draws = np.array(b_draws)
    share_draws = np.array(share_draws)
    return BootstrapResult(
        b_draws.std(axis=0), share_draws.std(axis=0),
        b_draws, share_draws, tuple(failures), reps, seed,
    )
