"""Kernel two-sample discrepancy and within-batch optimal pairing."""

import numpy as np
import torch
from scipy.optimize import linear_sum_assignment

from ..exceptions import InvalidArgumentError

__all__ = ["mmd", "median_bandwidths", "ot_assignment"]

BANDWIDTH_FACTORS = (0.5, 1.0, 2.0)


def _kernel_sum(sq_dist, bandwidths):
    return sum(torch.exp(-sq_dist / (2.0 * b * b)) for b in bandwidths)


def mmd(batch_a, batch_b, bandwidths, biased=False):
    """Squared maximum mean discrepancy with a sum of Gaussian kernels.

    ``k(x, y) = sum_b exp(-|x - y|**2 / (2 b**2))``. The default unbiased
    estimate drops the diagonal of the within-sample kernel matrices and
    can be slightly negative.

    Accepts numpy arrays (returns a float) or torch tensors (returns a
    differentiable scalar tensor).
    """
    as_numpy = not isinstance(batch_a, torch.Tensor)
    a = torch.as_tensor(np.asarray(batch_a, dtype=float) if as_numpy else batch_a)
    b = torch.as_tensor(np.asarray(batch_b, dtype=float) if as_numpy else batch_b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise InvalidArgumentError("mmd expects two 2-D batches with the same number of columns")
    n, m = len(a), len(b)
    if n == 0 or m == 0 or (not biased and (n < 2 or m < 2)):
        raise InvalidArgumentError("mmd needs nonempty batches (at least 2 rows for the unbiased form)")
    k_aa = _kernel_sum(torch.cdist(a, a) ** 2, bandwidths)
    k_bb = _kernel_sum(torch.cdist(b, b) ** 2, bandwidths)
    k_ab = _kernel_sum(torch.cdist(a, b) ** 2, bandwidths)
    if biased:
        value = k_aa.mean() + k_bb.mean() - 2.0 * k_ab.mean()
    else:
        value = (
            (k_aa.sum() - k_aa.diagonal().sum()) / (n * (n - 1))
            + (k_bb.sum() - k_bb.diagonal().sum()) / (m * (m - 1))
            - 2.0 * k_ab.mean()
        )
    return float(value) if as_numpy else value


def median_bandwidths(batch, factors=BANDWIDTH_FACTORS):
    """Bandwidths ``factor * median pairwise distance`` of ``batch``."""
    x = np.asarray(batch, dtype=float)
    diff = x[:, None, :] - x[None, :, :]
    dist = np.sqrt((diff**2).sum(-1))[np.triu_indices(len(x), 1)]
    med = float(np.median(dist)) if dist.size else 1.0
    if not med > 0:
        med = 1.0
    return tuple(f * med for f in factors)


def ot_assignment(source, target):
    """Permutation ``p`` minimizing ``sum_i |source[i] - target[p[i]]|**2``."""
    source = np.asarray(source, dtype=float)
    target = np.asarray(target, dtype=float)
    if source.shape != target.shape:
        raise InvalidArgumentError("source and target batches must have the same shape")
    cost = ((source[:, None, :] - target[None, :, :]) ** 2).sum(-1)
    rows, cols = linear_sum_assignment(cost)
    perm = np.empty(len(source), dtype=int)
    perm[rows] = cols
    return perm
