"""Core domain types and array conventions shared by all modules.

Conventions fixed here and relied on everywhere else:

* variances and covariances use the population (1/n) estimator, so the
  cross-covariance and the per-side variance matrices are mutually
  consistent;
* doubly-indexed objects flatten the attribute pair (i, j) row-major,
  i.e. (i, j) -> i * d_y + j.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, ZeroVarianceColumn


def _as_2d(a, name):
    arr = np.asarray(a, dtype=float)
    if arr.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True)
class MatchedSample:
    """n observed couples as paired attribute matrices (n x d_x, n x d_y)."""

    x: np.ndarray
    y: np.ndarray
    attribute_names_x: tuple = None
    attribute_names_y: tuple = None

    def __post_init__(self):
        x = _as_2d(self.x, "x")
        y = _as_2d(self.y, "y")
        if x.shape[0] != y.shape[0]:
            raise DimensionMismatch(
                f"x has {x.shape[0]} rows but y has {y.shape[0]}"
            )
        if x.shape[0] < 2:
            raise ValueError("need at least 2 couples")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        names_x = self.attribute_names_x or tuple(f"x{i}" for i in range(x.shape[1]))
        names_y = self.attribute_names_y or tuple(f"y{j}" for j in range(y.shape[1]))
        if len(names_x) != x.shape[1] or len(names_y) != y.shape[1]:
            raise DimensionMismatch("attribute name lists do not match column counts")
        object.__setattr__(self, "attribute_names_x", tuple(names_x))
        object.__setattr__(self, "attribute_names_y", tuple(names_y))

    @property
    def n(self):
        return self.x.shape[0]

    @property
    def d_x(self):
        return self.x.shape[1]

    @property
    def d_y(self):
        return self.y.shape[1]


@dataclass(frozen=True)
class ScalingRecord:
    """Per-column (mean, std) pairs recorded by ``standardize``."""

    mean_x: np.ndarray
    std_x: np.ndarray
    mean_y: np.ndarray
    std_y: np.ndarray


@dataclass(frozen=True)
class DiscreteMarginal:
    """Finitely supported attribute distribution: m support points and weights."""

    weights: np.ndarray
    support: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        s = np.asarray(self.support, dtype=float)
        if s.ndim == 1:
            s = s[:, None]
        if w.ndim != 1 or s.shape[0] != w.shape[0]:
            raise DimensionMismatch("weights and support sizes differ")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        if abs(w.sum() - 1.0) >= 1e-12:
            raise ValueError(f"weights sum to {w.sum()!r}, not 1")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "support", s)

    @property
    def m(self):
        return self.weights.shape[0]

    @property
    def d(self):
        return self.support.shape[1]


@dataclass(frozen=True)
class Coupling:
    """Joint matching distribution with prescribed marginals."""

    pi: np.ndarray
    row_marginal: DiscreteMarginal
    col_marginal: DiscreteMarginal

    def __post_init__(self):
        pi = np.asarray(self.pi, dtype=float)
        if pi.shape != (self.row_marginal.m, self.col_marginal.m):
            raise DimensionMismatch(
                f"pi shape {pi.shape} does not match marginals "
                f"({self.row_marginal.m}, {self.col_marginal.m})"
            )
        object.__setattr__(self, "pi", pi)

    def marginal_error(self):
        """Sup-norm violation of the two marginal constraints."""
        row_err = np.max(np.abs(self.pi.sum(axis=1) - self.row_marginal.weights))
        col_err = np.max(np.abs(self.pi.sum(axis=0) - self.col_marginal.weights))
        return max(row_err, col_err)


@dataclass(frozen=True)
class AffinityModel:
    """Affinity matrix A with heterogeneity scale sigma; B = A / sigma."""

    a_matrix: np.ndarray
    sigma: float = 1.0
    normalized: bool = False

    def __post_init__(self):
        a = _as_2d(self.a_matrix, "a_matrix")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.normalized and abs(np.linalg.norm(a) - 1.0) >= 1e-12:
            raise ValueError("normalized flag set but ||A||_F != 1")
        object.__setattr__(self, "a_matrix", a)

    @property
    def b_matrix(self):
        return self.a_matrix / self.sigma

    @property
    def d_x(self):
        return self.a_matrix.shape[0]

    @property
    def d_y(self):
        return self.a_matrix.shape[1]

    @staticmethod
    def from_b(b_matrix):
        """Normalize B into (A, sigma) with ||A||_F = 1, sigma = 1/||B||_F."""
        b = _as_2d(b_matrix, "b_matrix")
        norm = np.linalg.norm(b)
        if norm == 0.0:
            # Independence: A is not identified, keep the zero matrix at sigma 1.
            return AffinityModel(b, sigma=1.0, normalized=False)
        return AffinityModel(b / norm, sigma=1.0 / norm, normalized=True)

    def phi(self, x, y):
        """Joint utility x' A y on a support-point grid (m_x x m_y)."""
        return np.asarray(x, dtype=float) @ self.a_matrix @ np.asarray(y, dtype=float).T


@dataclass(frozen=True)
class Potentials:
    """Lagrange multipliers (a over the x-support, b over the y-support).

    Normalized so that the weighted mean of ``a`` under the x-marginal is 0.
    """

    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "a", np.asarray(self.a, dtype=float))
        object.__setattr__(self, "b", np.asarray(self.b, dtype=float))


@dataclass(frozen=True)
class DoublyIndexedMatrix:
    """Square matrix over attribute pairs, pair (i, j) flattened to i*d_y + j."""

    data: np.ndarray
    d_x: int
    d_y: int

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        size = self.d_x * self.d_y
        if data.shape != (size, size):
            raise DimensionMismatch(
                f"data shape {data.shape}, expected ({size}, {size})"
            )
        object.__setattr__(self, "data", data)

    def flatten_index(self, i, j):
        if not (0 <= i < self.d_x and 0 <= j < self.d_y):
            raise IndexError((i, j))
        return i * self.d_y + j

    def unflatten_index(self, r):
        if not 0 <= r < self.d_x * self.d_y:
            raise IndexError(r)
        return divmod(r, self.d_y)

    def entry(self, i, j, k, l):
        """Entry with row pair (i, j) and column pair (k, l)."""
        return self.data[self.flatten_index(i, j), self.flatten_index(k, l)]


def flatten_matrix(m):
    """Vectorize a d_x x d_y matrix with the row-major pair convention."""
    return np.asarray(m, dtype=float).reshape(-1)


def unflatten_vector(v, d_x, d_y):
    return np.asarray(v, dtype=float).reshape(d_x, d_y)


def standardize(sample):
    """Center and scale every column to mean 0, variance 1 (population 1/n).

    Returns the transformed sample and a ScalingRecord holding the original
    per-column means and standard deviations.
    """
    stats = []
    for block, names in ((sample.x, sample.attribute_names_x),
                         (sample.y, sample.attribute_names_y)):
        mean = block.mean(axis=0)
        std = block.std(axis=0)  # population convention (ddof=0)
        for j, s in enumerate(std):
            if s == 0.0:
                raise ZeroVarianceColumn(names[j])
        stats.append((mean, std))
    (mx, sx), (my, sy) = stats
    out = MatchedSample(
        (sample.x - mx) / sx,
        (sample.y - my) / sy,
        sample.attribute_names_x,
        sample.attribute_names_y,
    )
    return out, ScalingRecord(mx, sx, my, sy)


def cross_covariance(sample):
    """Sigma_XY with entry (i, j) = (1/n) sum_k x_ki y_kj (data assumed centered)."""
    return sample.x.T @ sample.y / sample.n


def variance_matrices(sample):
    """Diagonal per-column variance matrices (S_X, S_Y), population convention."""
    return (np.diag(sample.x.var(axis=0)), np.diag(sample.y.var(axis=0)))


def kronecker(a, b):
    """Doubly-indexed product R with R^{ij}_{kl} = a_ik * b_jl.

    Under the row-major flattening this is exactly ``np.kron(a, b)``; as an
    operator it acts on a matrix M by R . M = a M b'.
    """
    a = _as_2d(a, "a")
    b = _as_2d(b, "b")
    if a.shape[0] != a.shape[1] or b.shape[0] != b.shape[1]:
        raise DimensionMismatch("kronecker factors must be square")
    return DoublyIndexedMatrix(np.kron(a, b), a.shape[0], b.shape[0])


def empirical_marginals(sample):
    """The two empirical attribute measures: each couple's side is one
    support point with weight 1/n."""
    n = sample.n
    w = np.full(n, 1.0 / n)
    return DiscreteMarginal(w, sample.x), DiscreteMarginal(w.copy(), sample.y)
