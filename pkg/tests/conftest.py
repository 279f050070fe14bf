import numpy as np
import pytest

from affinity.core import DiscreteMarginal


def hermite_marginal(m=201):
    """Discretized standard normal on a Gauss-Hermite-style grid."""
    from numpy.polynomial.hermite_e import hermegauss

    z, w = hermegauss(m)
    return DiscreteMarginal(w / w.sum(), z)


@pytest.fixture(scope="session")
def gauss_grid():
    return hermite_marginal(201)


def random_marginal(rng, m, d=1):
    return DiscreteMarginal(rng.dirichlet(np.ones(m)), rng.normal(size=(m, d)))


def conditional_slope(coupling):
    """Weighted regression slope of E[Y|X=x] on x for 1-d supports."""
    z_x = coupling.row_marginal.support[:, 0]
    z_y = coupling.col_marginal.support[:, 0]
    w = coupling.pi.sum(axis=1)
    pos = w > 0
    cond = np.zeros_like(z_x)
    cond[pos] = (coupling.pi @ z_y)[pos] / w[pos]
    return float(np.sum(w * z_x * cond) / np.sum(w * z_x * z_x))
