"""Affinity-matrix estimation for bipartite matching markets.

Estimates the strength of multidimensional assortative matching from
matched-couples data: solves the entropy-regularized assignment problem,
fits the affinity matrix by convex moment matching, decomposes it into
orthogonal indices of mutual attractiveness, and tests how many dimensions
the sorting occurs on.
"""

__version__ = "0.1.0"

from ._kernels import BACKEND as KERNEL_BACKEND
from .core import (
    AffinityModel,
    Coupling,
    DiscreteMarginal,
    DoublyIndexedMatrix,
    MatchedSample,
    Potentials,
    ScalingRecord,
    cross_covariance,
    empirical_marginals,
    kronecker,
    standardize,
    variance_matrices,
)

__all__ = [
    "KERNEL_BACKEND",
    "AffinityModel",
    "Coupling",
    "DiscreteMarginal",
    "DoublyIndexedMatrix",
    "MatchedSample",
    "Potentials",
    "ScalingRecord",
    "cross_covariance",
    "empirical_marginals",
    "kronecker",
    "standardize",
    "variance_matrices",
]
