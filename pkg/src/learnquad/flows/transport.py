"""Closed-form transports, node mapping and the learned-quadrature estimator."""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin, clone
from sklearn.utils.validation import check_array, check_is_fitted

from ..exceptions import InvalidArgumentError
from ..quadrature import integrate, smolyak_rule
from .base import check_latent

__all__ = ["LinearTransport", "IdentityTransport", "LearnedQuadrature", "generate", "map_nodes"]


class LinearTransport(TransformerMixin, BaseEstimator):
    """Affine generative map ``g(xi) = matrix @ xi + offset``.

    Parameters
    ----------
    matrix : array_like, shape (M, M) or (M,), optional
        Linear part; a vector means a diagonal scaling. When omitted, ``fit``
        uses the Cholesky factor of the sample covariance.
    offset : array_like, shape (M,), optional
        Shift; ``fit`` uses the sample mean when omitted.
    """

    def __init__(self, matrix=None, offset=None):
        self.matrix = matrix
        self.offset = offset

    def fit(self, X=None, y=None):
        if X is not None:
            X = check_array(X, dtype=np.float64, ensure_min_samples=2)
            dim = X.shape[1]
        elif self.matrix is not None:
            dim = np.atleast_1d(np.asarray(self.matrix)).shape[0]
        elif self.offset is not None:
            dim = len(self.offset)
        else:
            raise InvalidArgumentError("LinearTransport.fit needs data or an explicit matrix/offset")
        if self.matrix is None:
            matrix = np.linalg.cholesky(np.atleast_2d(np.cov(X, rowvar=False)))
        else:
            matrix = np.asarray(self.matrix, dtype=float)
            matrix = np.diag(matrix) if matrix.ndim == 1 else matrix
        offset = X.mean(axis=0) if self.offset is None else np.asarray(self.offset, dtype=float)
        if matrix.shape != (dim, dim) or offset.shape != (dim,):
            raise InvalidArgumentError("matrix/offset do not match the data dimension")
        if np.linalg.matrix_rank(matrix) < dim:
            raise InvalidArgumentError("linear transport must be invertible")
        self.matrix_ = matrix
        self.offset_ = offset
        self.n_features_in_ = dim
        return self

    def transform(self, X):
        check_is_fitted(self, "matrix_")
        X = check_latent(self, X)
        return np.linalg.solve(self.matrix_, (X - self.offset_).T).T

    def inverse_transform(self, X):
        check_is_fitted(self, "matrix_")
        X = check_latent(self, X)
        return X @ self.matrix_.T + self.offset_


class IdentityTransport(LinearTransport):
    """The identity map in a fixed dimension (or the dimension of the fit data)."""

    def __init__(self, dim=None):
        self.dim = dim

    def fit(self, X=None, y=None):
        dim = self.dim if X is None else check_array(X, dtype=np.float64).shape[1]
        if dim is None:
            raise InvalidArgumentError("IdentityTransport needs data or an explicit dim")
        self.matrix_ = np.eye(dim)
        self.offset_ = np.zeros(dim)
        self.n_features_in_ = dim
        return self


def generate(model, xi):
    """Apply the generative map of a fitted transport to latent point(s) ``xi``."""
    xi = np.asarray(xi, dtype=float)
    out = model.inverse_transform(np.atleast_2d(xi))
    return out[0] if xi.ndim == 1 else out


def map_nodes(model, rule):
    """Push the nodes of ``rule`` through the generative map, keeping the weights.

    Raises
    ------
    InvalidArgumentError
        If the model and rule dimensions differ.
    """
    check_is_fitted(model, "n_features_in_")
    if model.n_features_in_ != rule.dim:
        raise InvalidArgumentError(f"model dimension {model.n_features_in_} != rule dimension {rule.dim}")
    return rule.with_nodes(generate(model, rule.nodes))


class LearnedQuadrature(BaseEstimator):
    """Sparse Gauss-Hermite rule transported to the distribution of the training data.

    Parameters
    ----------
    transport : estimator
        Any transport with ``fit`` and ``inverse_transform`` (e.g.
        :class:`~learnquad.flows.FlowMatching`).
    level : int
        Sparse-grid level; the latent rule is exact up to degree ``2 level - 1``.
    prefit : bool
        Use ``transport`` as already fitted instead of fitting a clone.

    Attributes
    ----------
    transport_ : estimator
    rule_ : QuadratureRule
        Mapped nodes with the original weights.
    """

    def __init__(self, transport=None, level=3, prefit=False):
        self.transport = transport
        self.level = level
        self.prefit = prefit

    def fit(self, X=None, y=None):
        transport = self.transport if self.transport is not None else LinearTransport()
        if self.prefit:
            check_is_fitted(transport, "n_features_in_")
            self.transport_ = transport
        else:
            self.transport_ = clone(transport).fit(X)
        self.n_features_in_ = self.transport_.n_features_in_
        self.rule_ = map_nodes(self.transport_, smolyak_rule(self.n_features_in_, self.level))
        return self

    def integrate(self, f, vectorized=False):
        """Estimate ``E[f(eta)]`` with the mapped rule."""
        check_is_fitted(self, "rule_")
        return integrate(self.rule_, f, vectorized=vectorized)
