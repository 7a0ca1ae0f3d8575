"""Gauss-Hermite rules and Smolyak sparse grids for the standard normal.

All rules integrate against the probabilist's weight, i.e. the density
``(2*pi)**(-M/2) * exp(-|x|**2 / 2)``, so weights sum to one.
"""

import csv
import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from math import comb, prod

import numpy as np

from .exceptions import InvalidArgumentError, NonFiniteIntegrandError

__all__ = [
    "UnivariateRule",
    "QuadratureRule",
    "gauss_hermite_1d",
    "smolyak_rule",
    "integrate",
    "gaussian_monomial_moment",
    "monomial_exponents",
    "write_rule_csv",
    "read_rule_csv",
]


@dataclass(frozen=True)
class UnivariateRule:
    n: int
    nodes: np.ndarray
    weights: np.ndarray


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Multivariate rule with signed weights.

    ``nodes`` has shape ``(n_quad, dim)`` and ``weights`` shape ``(n_quad,)``.
    ``level`` is the sparse-grid level counted from one (``L_SG``).
    """

    dim: int
    level: int
    nodes: np.ndarray
    weights: np.ndarray
    exactness_degree: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "exactness_degree", 2 * self.level - 1)
        self.nodes.setflags(write=False)
        self.weights.setflags(write=False)

    @property
    def n_quad(self):
        return self.weights.shape[0]

    def __len__(self):
        return self.n_quad

    def with_nodes(self, nodes):
        """Return a rule with the same weights and replaced nodes."""
        nodes = np.array(nodes, dtype=float)
        if nodes.shape[0] != self.n_quad:
            raise InvalidArgumentError(
                f"expected {self.n_quad} node rows, got {nodes.shape[0]}"
            )
        return QuadratureRule(nodes.shape[1], self.level, nodes, self.weights)


@lru_cache(maxsize=None)
def _gauss_hermite_cached(n):
    # Jacobi matrix of the monic probabilist's Hermite recurrence
    # He_{k+1} = x He_k - k He_{k-1}: zero diagonal, off-diagonal sqrt(k).
    off = np.sqrt(np.arange(1, n, dtype=float))
    jacobi = np.diag(off, 1) + np.diag(off, -1)
    nodes, vectors = np.linalg.eigh(jacobi)
    weights = vectors[0, :] ** 2

    # Exact symmetry keeps node merging in the sparse grid bit-exact.
    nodes = 0.5 * (nodes - nodes[::-1])
    weights = 0.5 * (weights + weights[::-1])
    if n % 2 == 1:
        nodes[n // 2] = 0.0
    weights = weights / weights.sum()
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def gauss_hermite_1d(n):
    """Return the ``n``-point probabilist's Gauss-Hermite rule.

    Nodes are the eigenvalues of the symmetric tridiagonal Jacobi matrix,
    weights the squared first components of its normalized eigenvectors
    (Golub-Welsch). Repeated calls with the same ``n`` return identical
    arrays.

    Parameters
    ----------
    n : int
        Number of nodes, at least one.

    Returns
    -------
    UnivariateRule
    """
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise InvalidArgumentError(f"node count must be a positive integer, got {n!r}")
    nodes, weights = _gauss_hermite_cached(int(n))
    return UnivariateRule(int(n), nodes, weights)


def _excess_vectors(dim, total):
    """Yield all nonnegative integer vectors of length ``dim`` summing to ``total``."""
    for combo in itertools.combinations_with_replacement(range(dim), total):
        excess = [0] * dim
        for k in combo:
            excess[k] += 1
        yield excess


def _product_rule(nu):
    active = [m for m, v in enumerate(nu) if v > 1]
    count = prod(nu[m] for m in active)
    nodes = np.zeros((count, len(nu)))
    # Inactive coordinates use the one-point rule: node 0, weight 1.
    weights = np.ones(count)
    if active:
        rules = [gauss_hermite_1d(nu[m]) for m in active]
        grids = np.meshgrid(*[r.nodes for r in rules], indexing="ij")
        wgrids = np.meshgrid(*[r.weights for r in rules], indexing="ij")
        for col, g in zip(active, grids):
            nodes[:, col] = g.ravel()
        weights = np.prod([w.ravel() for w in wgrids], axis=0)
    return nodes, weights


def smolyak_rule(dim, level):
    """Build the Smolyak sparse Gauss-Hermite rule.

    Uses the combination form with univariate rules of ``k`` nodes at
    univariate level ``k``. With ``L = level - 1 + dim`` every multi-index
    ``nu >= 1`` with ``L - dim < |nu| <= L`` contributes its product rule
    scaled by ``(-1)**(L - |nu|) * binom(dim - 1, L - |nu|)``. Coincident
    nodes are merged and nodes whose accumulated weight is exactly zero are
    dropped. The rule is exact for total degree ``2 * level - 1``.

    Parameters
    ----------
    dim : int
        Number of variables ``M``.
    level : int
        Sparse-grid level ``L_SG >= 1``.

    Returns
    -------
    QuadratureRule
        Nodes sorted lexicographically.
    """
    for name, val in (("dim", dim), ("level", level)):
        if isinstance(val, bool) or int(val) != val or val < 1:
            raise InvalidArgumentError(f"{name} must be a positive integer, got {val!r}")
    dim, level = int(dim), int(level)
    big_l = level - 1 + dim

    node_blocks, weight_blocks = [], []
    # |nu| = dim + s; binom(dim - 1, L - |nu|) vanishes unless L - |nu| < dim.
    for s in range(max(0, level - dim), level):
        gap = big_l - (dim + s)
        coef = (-1) ** gap * comb(dim - 1, gap)
        for excess in _excess_vectors(dim, s):
            nodes, weights = _product_rule([1 + e for e in excess])
            node_blocks.append(nodes)
            weight_blocks.append(coef * weights)

    all_nodes = np.concatenate(node_blocks)
    all_weights = np.concatenate(weight_blocks)
    unique, inverse = np.unique(all_nodes, axis=0, return_inverse=True)
    merged = np.bincount(inverse.ravel(), weights=all_weights, minlength=len(unique))
    keep = merged != 0.0
    return QuadratureRule(dim, level, unique[keep], merged[keep])


def integrate(rule, f, vectorized=False):
    """Return ``sum_j w_j f(x_j)``.

    Parameters
    ----------
    rule : QuadratureRule
    f : callable
        Maps one node (1-D array of length ``dim``) to a real number, or,
        with ``vectorized=True``, the full ``(n_quad, dim)`` node matrix to
        an array of ``n_quad`` values.

    Raises
    ------
    NonFiniteIntegrandError
        If ``f`` is non-finite at some node; the first such index is named.
    """
    if vectorized:
        values = np.asarray(f(rule.nodes), dtype=float).reshape(-1)
        if values.shape[0] != rule.n_quad:
            raise InvalidArgumentError(
                f"vectorized integrand returned {values.shape[0]} values for {rule.n_quad} nodes"
            )
    else:
        values = np.array([float(f(x)) for x in rule.nodes])
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        raise NonFiniteIntegrandError(int(bad[0]), float(values[bad[0]]))
    return float(np.dot(rule.weights, values))


def _normal_moment(e):
    if e % 2:
        return 0
    # (e - 1)!!
    return prod(range(e - 1, 0, -2))


def gaussian_monomial_moment(exponents):
    """Return ``E[prod_m x_m**e_m]`` for independent standard normals."""
    return float(prod(_normal_moment(int(e)) for e in exponents))


def monomial_exponents(dim, max_degree):
    """Return all exponent vectors of total degree ``<= max_degree``.

    The result is an integer array of shape ``(C(dim + max_degree, dim), dim)``
    ordered by degree, constant monomial first.
    """
    rows = []
    for degree in range(max_degree + 1):
        rows.extend(_excess_vectors(dim, degree))
    return np.array(rows, dtype=int).reshape(-1, dim)


def write_rule_csv(rule, path):
    """Write ``w,x1,...,xM`` rows with 17 significant digits."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["w"] + [f"x{m + 1}" for m in range(rule.dim)])
        for w, x in zip(rule.weights, rule.nodes):
            writer.writerow([f"{w:.17g}"] + [f"{v:.17g}" for v in x])


def read_rule_csv(path, level=None):
    """Read a rule written by :func:`write_rule_csv`.

    The level is not stored in the file; pass it to restore
    ``exactness_degree``, otherwise it is set to 1.
    """
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return QuadratureRule(data.shape[1] - 1, level or 1, data[:, 1:].copy(), data[:, 0].copy())
