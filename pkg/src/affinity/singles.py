"""Identification with observed singles.

When unmatched individuals are observed, the density ratio between the
whole population (f-bar) and the singles (f0) on each side identifies the
reservation utilities up to a gauge, and the fully gauge-free utility
surplus from matching.  Continuous attributes are binned into
quantile cells per attribute; on a purely discrete market the surplus
formula reduces exactly to log(mu_xy^2 / (mu_x0 * mu_0y)) at scale 2.
"""

from dataclasses import dataclass

import numpy as np

from .errors import AllSingleBin, EmptyBin, ZeroSingles
from .simulate import DiscreteMarket


@dataclass(frozen=True)
class Binning:
    """Per-attribute quantile bin edges for one side."""

    edges: tuple  # one 1-d edge array per attribute

    def assign(self, values):
        """Flattened cell id per row (row-major over attributes)."""
        values = np.asarray(values, dtype=float)
        cell = np.zeros(values.shape[0], dtype=int)
        for k, e in enumerate(self.edges):
            idx = np.clip(np.searchsorted(e, values[:, k], side="right") - 1,
                          0, len(e) - 2)
            cell = cell * (len(e) - 1) + idx
        return cell

    @property
    def n_cells(self):
        out = 1
        for e in self.edges:
            out *= len(e) - 1
        return out


def quantile_binning(values, bins=5):
    values = np.asarray(values, dtype=float)
    edges = []
    for k in range(values.shape[1]):
        qs = np.quantile(values[:, k], np.linspace(0, 1, bins + 1))
        qs[0], qs[-1] = -np.inf, np.inf
        edges.append(np.unique(qs))
    return Binning(tuple(edges))


@dataclass(frozen=True)
class PopulationWithSingles:
    """Matched couples plus per-side singles, reduced to cell counts.

    ``mu_xy`` counts matched couples per (x-cell, y-cell); ``mu_x0`` and
    ``mu_0y`` count singles per cell.  f-bar and g-bar are the row/column
    population totals.  Total masses of the two sides need not agree.
    """

    mu_xy: np.ndarray
    mu_x0: np.ndarray
    mu_0y: np.ndarray
    binning_x: Binning = None
    binning_y: Binning = None

    @property
    def f_bar(self):
        return self.mu_xy.sum(axis=1) + self.mu_x0

    @property
    def g_bar(self):
        return self.mu_xy.sum(axis=0) + self.mu_0y


def bin_population(matched, singles_x, singles_y, bins=5):
    """Build cell counts from raw attribute data (quantile bins on the
    pooled per-side populations)."""
    singles_x = np.asarray(singles_x, dtype=float)
    singles_y = np.asarray(singles_y, dtype=float)
    bx = quantile_binning(np.vstack([matched.x, singles_x]), bins)
    by = quantile_binning(np.vstack([matched.y, singles_y]), bins)
    nx, ny = bx.n_cells, by.n_cells
    cx = bx.assign(matched.x)
    cy = by.assign(matched.y)
    mu_xy = np.zeros((nx, ny))
    np.add.at(mu_xy, (cx, cy), 1.0)
    mu_x0 = np.bincount(bx.assign(singles_x), minlength=nx).astype(float)
    mu_0y = np.bincount(by.assign(singles_y), minlength=ny).astype(float)
    return PopulationWithSingles(mu_xy, mu_x0, mu_0y, bx, by)


def from_discrete_market(market: DiscreteMarket):
    return PopulationWithSingles(market.mu_xy, market.mu_x0, market.mu_0y)


def _check_side(f_bar, f0, require_matched=True, require_singles=True):
    if np.any(f_bar == 0):
        raise EmptyBin("a cell has no population mass")
    if require_matched and np.any(f_bar == f0):
        raise AllSingleBin("a cell is entirely single; log ratio diverges")
    if require_singles and np.any(f0 == 0):
        raise ZeroSingles("a cell has no singles; log ratio diverges")


def reservation_utilities(pop, sigma=2.0, gauge=None):
    """Per-cell reservation utilities under an explicit gauge.

    Returns (phi_x_empty, phi_empty_y, gauge) with
    phi(x, 0) = (sigma/2) * (log f0/(f_bar - f0) + c(x)) and symmetrically
    on the other side; the gauge functions (c, d) are undetermined by the
    data and echoed back so downstream consumers see the dependence.
    """
    f_bar, f0 = pop.f_bar, pop.mu_x0
    g_bar, g0 = pop.g_bar, pop.mu_0y
    _check_side(f_bar, f0)
    _check_side(g_bar, g0)
    c = np.zeros(f0.shape[0]) if gauge is None else np.asarray(gauge[0], dtype=float)
    d = np.zeros(g0.shape[0]) if gauge is None else np.asarray(gauge[1], dtype=float)
    phi_x0 = (sigma / 2.0) * (np.log(f0 / (f_bar - f0)) + c)
    phi_0y = (sigma / 2.0) * (np.log(g0 / (g_bar - g0)) + d)
    return phi_x0, phi_0y, (c, d)


def matching_surplus(pop, coupling=None, sigma=2.0):
    """Gauge-free utility surplus from matching, per (x, y) cell.

    (sigma/2) * log[ pi(y|x) (f_bar-f0)/f0 * pi(x|y) (g_bar-g0)/g0 ];
    with cell counts this is (sigma/2) * log(mu_xy^2 / (mu_x0 mu_0y)),
    which at sigma = 2 is exactly the discrete-market surplus.

    If ``coupling`` is given, its matrix supplies the matched conditional
    laws instead of the population's own matched counts.
    """
    f_bar, f0 = pop.f_bar, pop.mu_x0
    g_bar, g0 = pop.g_bar, pop.mu_0y
    _check_side(f_bar, f0)
    _check_side(g_bar, g0)
    if coupling is None:
        mu = pop.mu_xy
    else:
        mu = np.asarray(coupling.pi, dtype=float)
    f = mu.sum(axis=1)
    g = mu.sum(axis=0)
    with np.errstate(divide="ignore"):
        pi_y_given_x = np.log(mu) - np.log(f)[:, None]
        pi_x_given_y = np.log(mu) - np.log(g)[None, :]
    term_x = pi_y_given_x + (np.log(f_bar - f0) - np.log(f0))[:, None]
    term_y = pi_x_given_y + (np.log(g_bar - g0) - np.log(g0))[None, :]
    return (sigma / 2.0) * (term_x + term_y)


def exante_surplus(pop):
    """Ex-ante expected utility surplus per cell: u = log(f_bar/f0)."""
    f_bar, f0 = pop.f_bar, pop.mu_x0
    g_bar, g0 = pop.g_bar, pop.mu_0y
    _check_side(f_bar, f0, require_matched=False)
    _check_side(g_bar, g0, require_matched=False)
    return np.log(f_bar / f0), np.log(g_bar / g0)
