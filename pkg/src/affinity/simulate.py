"""Synthetic data generators with known closed-form equilibria.

Three families:

* Gaussian-quadratic: standard normal marginals with joint utility
  x'By; for scalar (or diagonal) B the equilibrium conditional law is
  Gaussian with slope t = sqrt(1/(4b^2) + 1) - 1/(2|b|) per coordinate,
  which makes exact recovery checks possible.
* Poisson acquaintance process: each trial draws a Poisson set of
  potential partners marked with i.i.d. Gumbel-type taste shocks and
  picks the best; the resulting choice density is the continuous logit
  and the best value is Gumbel distributed.
* Discrete two-sided market with singles, solved at its logit
  equilibrium, for testing the singles-identification formulas.
"""

from dataclasses import dataclass

import numpy as np

from .core import MatchedSample
from .errors import NoAcquaintance


def gaussian_slope(sigma):
    """Equilibrium conditional-mean slope for scalar utility x*y at scale
    sigma: t = sqrt(sigma^2/4 + 1) - sigma/2 (t -> 1 as sigma -> 0)."""
    sigma = float(sigma)
    return np.sqrt(sigma**2 / 4.0 + 1.0) - sigma / 2.0


def slope_from_b(b):
    """Slope of the equilibrium conditional law for utility b*x*y at unit
    scale; equals gaussian_slope(1/|b|) with the sign of b, and 0 at b=0."""
    b = float(b)
    if b == 0.0:
        return 0.0
    return np.sign(b) * gaussian_slope(1.0 / abs(b))


def simulate_gaussian_1d(sigma, n, seed):
    """Couples from the scalar Gaussian equilibrium at scale sigma."""
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    rng = np.random.default_rng(seed)
    t = gaussian_slope(sigma)
    x = rng.standard_normal((n, 1))
    y = t * x + np.sqrt(1.0 - t * t) * rng.standard_normal((n, 1))
    return MatchedSample(x, y)


def simulate_gaussian_diagonal(b_diag, n, seed, d_x=None, d_y=None):
    """Couples from the equilibrium with diagonal B and independent
    standard normal coordinates (the problem factorizes per pair).

    Coordinates beyond len(b_diag) (up to d_x, d_y) are independent
    standard normals.
    """
    b_diag = np.atleast_1d(np.asarray(b_diag, dtype=float))
    d = b_diag.shape[0]
    d_x = d_x or d
    d_y = d_y or d
    if d > min(d_x, d_y):
        raise ValueError("more diagonal entries than dimensions")
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, d_x))
    y = rng.standard_normal((n, d_y))
    t = np.array([slope_from_b(b) for b in b_diag])
    y[:, :d] = t[None, :] * x[:, :d] + np.sqrt(1.0 - t * t)[None, :] * y[:, :d]
    return MatchedSample(x, y)


@dataclass(frozen=True)
class PoissonLogitSpec:
    """Acquaintance process on a bounded 1-d partner domain.

    ``systematic_utility`` maps partner values to utilities (vectorized);
    ``eps_min`` truncates the shock intensity e^{-eps} d eps: only marks
    above it are sampled, so the expected number of acquaintances is
    (hi - lo) * exp(-eps_min).  By default eps_min is set so that the
    expected count is ``target_count``.
    """

    systematic_utility: callable
    lo: float = 0.0
    hi: float = 1.0
    eps_min: float = None
    target_count: float = 50.0
    seed: int = 0

    def resolved_eps_min(self):
        if self.eps_min is not None:
            return float(self.eps_min)
        return float(np.log((self.hi - self.lo) / self.target_count))


@dataclass(frozen=True)
class ChoiceSample:
    choices: np.ndarray
    max_values: np.ndarray
    redraws: int
    eps_min: float


def simulate_poisson_logit_choice(spec, trials):
    """Sample best-partner choices from the truncated acquaintance process.

    Per trial the acquaintance set is Poisson with uniform partner values
    and shocks eps_min + Exponential(1); the chosen partner maximizes
    U(y) + eps and the recorded maximum Z is asymptotically Gumbel with
    location log integral(exp U).  Trials that draw no acquaintances are
    redrawn with a lower truncation (counted in ``redraws``).
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(spec.seed)
    eps_min = spec.resolved_eps_min()
    length = spec.hi - spec.lo
    if length <= 0:
        raise ValueError("empty partner domain")

    choices = np.empty(trials)
    max_values = np.empty(trials)
    pending = np.arange(trials)
    redraws = 0
    cur_eps = eps_min
    while pending.size:
        lam = length * np.exp(-cur_eps)
        counts = rng.poisson(lam, size=pending.size)
        ok = counts > 0
        if not ok.all():
            redraws += int((~ok).sum())
        idx = pending[ok]
        counts = counts[ok]
        total = int(counts.sum())
        ys = rng.uniform(spec.lo, spec.hi, size=total)
        eps = cur_eps + rng.standard_exponential(total)
        vals = np.asarray(spec.systematic_utility(ys), dtype=float) + eps
        starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
        best = np.maximum.reduceat(vals, starts)
        # recover one argmax position per trial segment
        seg_id = np.repeat(np.arange(counts.size), counts)
        pos = np.flatnonzero(vals == best[seg_id])
        best_pos = np.full(counts.size, total)
        np.minimum.at(best_pos, seg_id[pos], pos)
        choices[idx] = ys[best_pos]
        max_values[idx] = best
        pending = pending[~ok]
        if pending.size and cur_eps == eps_min and lam < 1:
            # pathological truncation; deepen it for the retries
            cur_eps = eps_min - np.log(4.0)
        elif pending.size:
            cur_eps -= np.log(4.0)
        if redraws > 100 * trials:
            raise NoAcquaintance("persistent empty acquaintance sets")
    return ChoiceSample(choices, max_values, redraws, eps_min)


@dataclass(frozen=True)
class DiscreteMarket:
    """Discrete two-sided market at its logit matching equilibrium.

    ``mu_xy`` are matched masses per type pair, ``mu_x0``/``mu_0y`` single
    masses; at scale sigma the equilibrium satisfies
    mu_xy = sqrt(mu_x0 * mu_0y) * exp(phi_xy / sigma).
    """

    mu_xy: np.ndarray
    mu_x0: np.ndarray
    mu_0y: np.ndarray
    phi: np.ndarray
    sigma: float
    x_values: np.ndarray
    y_values: np.ndarray


def solve_discrete_equilibrium(phi, mass_x, mass_y, sigma=2.0, tol=1e-13,
                               max_iter=100000):
    """Fixed point for the discrete market with singlehood options.

    Substituting s = sqrt(mu_x0), r = sqrt(mu_0y) turns each side's adding
    -up constraint into a quadratic with positive root
    s = (-c + sqrt(c^2 + 4 m)) / 2, c = K r, alternated until convergence.
    """
    phi = np.asarray(phi, dtype=float)
    mass_x = np.asarray(mass_x, dtype=float)
    mass_y = np.asarray(mass_y, dtype=float)
    k = np.exp(phi / sigma)
    s = np.sqrt(mass_x)
    r = np.sqrt(mass_y)
    for _ in range(max_iter):
        c = k @ r
        s = 0.5 * (-c + np.sqrt(c**2 + 4.0 * mass_x))
        c = k.T @ s
        r_new = 0.5 * (-c + np.sqrt(c**2 + 4.0 * mass_y))
        if np.max(np.abs(r_new - r)) < tol:
            r = r_new
            break
        r = r_new
    mu_xy = s[:, None] * k * r[None, :]
    return mu_xy, s**2, r**2


def simulate_discrete_choo_siow(phi, mass_x, mass_y, seed=None, sigma=2.0,
                                x_values=None, y_values=None, total=None):
    """Discrete market at equilibrium; optionally sampled counts.

    With ``total`` set, multinomial counts with that many households are
    drawn around the equilibrium masses (seeded); otherwise the exact
    equilibrium masses are returned.
    """
    phi = np.asarray(phi, dtype=float)
    mu_xy, mu_x0, mu_0y = solve_discrete_equilibrium(phi, mass_x, mass_y, sigma)
    nx, ny = mu_xy.shape
    if x_values is None:
        x_values = np.arange(nx, dtype=float)[:, None]
    if y_values is None:
        y_values = np.arange(ny, dtype=float)[:, None]
    if total is not None:
        rng = np.random.default_rng(seed)
        masses = np.concatenate([mu_xy.reshape(-1), mu_x0, mu_0y])
        probs = masses / masses.sum()
        counts = rng.multinomial(total, probs).astype(float)
        mu_xy = counts[: nx * ny].reshape(nx, ny)
        mu_x0 = counts[nx * ny: nx * ny + nx]
        mu_0y = counts[nx * ny + nx:]
    return DiscreteMarket(mu_xy, mu_x0, mu_0y, phi, sigma,
                          np.asarray(x_values, dtype=float),
                          np.asarray(y_values, dtype=float))


def simulate_population_with_singles(sigma, n_couples, single_share, seed):
    """Gaussian-equilibrium couples plus standard normal singles.

    Singlehood enters only through the reservation utilities, so matched
    couples follow the same equilibrium law regardless of the singles
    share; the counts are chosen so that singles are the requested share
    of each side's population.
    """
    if not 0 <= single_share < 1:
        raise ValueError("single_share must be in [0, 1)")
    rng = np.random.default_rng(seed)
    matched = simulate_gaussian_1d(sigma, n_couples, rng.integers(2**63))
    n_singles = int(round(n_couples * single_share / (1.0 - single_share)))
    singles_x = rng.standard_normal((n_singles, 1))
    singles_y = rng.standard_normal((n_singles, 1))
    return matched, singles_x, singles_y
