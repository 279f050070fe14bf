"""Saliency analysis of a fitted affinity matrix.

The affinity matrix is rescaled by the attribute variances,
Theta = S_X^{1/2} A S_Y^{1/2}, and decomposed as Theta = U' Lambda V.
The rows of U S_X^{-1/2} and V S_Y^{-1/2} define orthogonal indices of
mutual attractiveness: in index coordinates the joint utility is
diagonal, sum_i lambda_i x~_i y~_i, and lambda_i / sum(lambda) is index
i's share of the observable joint utility.
"""

from dataclasses import dataclass

import numpy as np

from .core import AffinityModel
from .errors import DimensionMismatch, NonPositiveVariance


@dataclass(frozen=True)
class SaliencyResult:
    theta: np.ndarray
    u: np.ndarray
    v: np.ndarray
    lam: np.ndarray
    loadings_x: np.ndarray
    loadings_y: np.ndarray
    shares: np.ndarray
    s_x: np.ndarray
    s_y: np.ndarray
    degenerate_values: bool


def _diag_sqrt(s, name):
    s = np.asarray(s, dtype=float)
    if s.ndim == 1:
        s = np.diag(s)
    d = np.diag(s).copy()
    if np.any(d <= 0):
        raise NonPositiveVariance(f"{name} has non-positive diagonal entries")
    return np.sqrt(d)


def _sign_convention(u, v):
    """Make each row of U deterministic: its largest-magnitude entry is
    positive (ties broken at the lowest index), flipping the matching row
    of V to preserve the product U' Lambda V."""
    u = u.copy()
    v = v.copy()
    for i in range(u.shape[0]):
        row = u[i]
        j = int(np.argmax(np.abs(row)))
        if row[j] < 0:
            u[i] = -row
            v[i] = -v[i]
    return u, v


def saliency(model, s_x, s_y):
    """Decompose the model's affinity matrix into saliency indices."""
    sx_half = _diag_sqrt(s_x, "s_x")
    sy_half = _diag_sqrt(s_y, "s_y")
    a = model.a_matrix
    theta = sx_half[:, None] * a * sy_half[None, :]
    u_np, lam, vh = np.linalg.svd(theta)
    # Convention Theta = U' Lambda V (transposed relative to the numpy SVD).
    u, v = _sign_convention(u_np.T, vh)
    d = lam.shape[0]
    u, v = u[:d], v[:d]
    total = lam.sum()
    shares = lam / total if total > 0 else np.full(d, np.nan)
    loadings_x = u / sx_half[None, :]
    loadings_y = v / sy_half[None, :]
    gaps = np.abs(np.diff(lam))
    degenerate = bool(lam.size > 1 and np.any(gaps < 1e-10 * max(lam[0], 1.0)))
    return SaliencyResult(
        theta, u, v, lam, loadings_x, loadings_y, shares,
        np.diag(sx_half**2), np.diag(sy_half**2), degenerate,
    )


def project_indices(sample, result):
    """Per-couple index values x~ = U S_X^{-1/2} x and y~ = V S_Y^{-1/2} y."""
    if sample.d_x != result.loadings_x.shape[1]:
        raise DimensionMismatch("sample and saliency result disagree on d_x")
    if sample.d_y != result.loadings_y.shape[1]:
        raise DimensionMismatch("sample and saliency result disagree on d_y")
    return sample.x @ result.loadings_x.T, sample.y @ result.loadings_y.T


def truncate(result, k):
    """Best rank-k affinity model in the rescaled metric.

    Rebuilds A from the top-k singular triplets mapped back to original
    attribute scale; the retained share of joint utility is
    sum_{i<=k} lambda_i / sum(lambda).
    """
    d = result.lam.shape[0]
    if not 1 <= k <= d:
        raise ValueError(f"k must be in [1, {d}]")
    theta_k = result.u[:k].T @ (result.lam[:k, None] * result.v[:k])
    sx_half_inv = 1.0 / np.sqrt(np.diag(result.s_x))
    sy_half_inv = 1.0 / np.sqrt(np.diag(result.s_y))
    a_k = sx_half_inv[:, None] * theta_k * sy_half_inv[None, :]
    norm = np.linalg.norm(a_k)
    model = AffinityModel(a_k, sigma=1.0, normalized=bool(abs(norm - 1) < 1e-12))
    explained = float(result.lam[:k].sum() / result.lam.sum())
    return model, explained
