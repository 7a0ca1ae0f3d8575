"""Modal datasets and the map from modal coefficients to conductivity fields."""

import math
import warnings

import numpy as np

from ..exceptions import InvalidArgumentError
from ..flows import LinearTransport
from ..levy import (
    LatticeField,
    continuum_point_variance,
    mode_basis,
    noise_density,
    psi_second_derivative_at_zero,
    reconstruct_values,
    sample_noise,
    smooth_field,
)
from .config import derive_seed

__all__ = [
    "generate_dataset",
    "sample_noise_fields",
    "write_dataset",
    "read_dataset",
    "mode_moments",
    "moment_matched_transport",
    "LogConductivity",
]


def sample_noise_fields(config, stream, indices):
    """Noise realizations (cell integrals) for the given task indices of a seed stream."""
    lattice, law = config.lattice, config.levy_law
    return [sample_noise(lattice, law, derive_seed(config.seed, stream, i)) for i in indices]


def generate_dataset(config, n_samples, stream="dataset", path=None, chunk=500):
    """Modal coefficient vectors of ``n_samples`` independent noise fields.

    Sample ``i`` uses its own derived seed, so the first ``k`` rows of a
    larger dataset equal a dataset of size ``k``.

    Returns
    -------
    ndarray, shape (n_samples, M)
    """
    if n_samples < 1:
        raise InvalidArgumentError("n_samples must be positive")
    lattice = config.lattice
    _, basis = mode_basis(lattice, config.mode_radius)
    out = np.empty((n_samples, len(basis)))
    for start in range(0, n_samples, chunk):
        idx = range(start, min(start + chunk, n_samples))
        cells = np.stack([f.values.ravel() for f in sample_noise_fields(config, stream, idx)])
        # Midpoint pairing with the density cells / measure: the measure cancels.
        out[idx.start : idx.stop] = cells @ basis.T
    if path is not None:
        write_dataset(out, path)
    return out


def write_dataset(eta, path):
    """Save as ``.npy`` or as CSV with header ``eta1,...,etaM``."""
    eta = np.asarray(eta, dtype=float)
    if str(path).endswith(".npy"):
        np.save(path, eta)
        return
    header = ",".join(f"eta{j + 1}" for j in range(eta.shape[1]))
    np.savetxt(path, eta, delimiter=",", header=header, comments="", fmt="%.17g")


def read_dataset(path):
    if str(path).endswith(".npy"):
        return np.load(path)
    try:
        return np.atleast_2d(np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2))
    except (OSError, ValueError) as exc:
        raise InvalidArgumentError(f"cannot read dataset {path}: {exc}") from None


def mode_moments(config):
    """Exact mean and variance of each modal coefficient.

    The cell integrals are independent with mean ``mu * a`` and variance
    ``-psi''(0) * a``, so coefficient ``l`` has mean ``mu a sum(b_l)`` and
    variance ``-psi''(0) a sum(b_l**2)``.
    """
    lattice, law = config.lattice, config.levy_law
    _, basis = mode_basis(lattice, config.mode_radius)
    a = lattice.cell_measure
    mean = law.mean_density() * a * basis.sum(axis=1)
    var = -psi_second_derivative_at_zero(law) * a * (basis**2).sum(axis=1)
    return mean, var


def moment_matched_transport(config):
    """Diagonal affine map from N(0, I) matching the modal means and variances.

    For Gaussian noise the coefficients are independent normals, so this map
    is the exact transport.
    """
    mean, var = mode_moments(config)
    return LinearTransport(matrix=np.sqrt(var), offset=mean).fit()


class LogConductivity:
    """Turns modal coefficients (or full noise fields) into log-conductivity fields.

    The truncated modal expansion uses the continuum eigenvalues. The field
    is multiplied by ``scale`` so that the untruncated periodic field has
    pointwise variance ``config.field_variance`` (no rescaling when that is
    ``None``); with ``config.center_field`` the noise mean is removed, and
    ``config.field_offset`` is added last.
    """

    def __init__(self, config):
        self.config = config
        self.lattice = config.lattice
        self.params = config.smoothing
        law = config.levy_law
        if config.field_variance is None:
            self.scale = 1.0
        else:
            raw = continuum_point_variance(law, self.params, self.lattice)
            self.scale = math.sqrt(config.field_variance / raw)
        mean_field = law.mean_density() * self.params.m2 ** (-self.params.alpha)
        self.shift = config.field_offset - (self.scale * mean_field if config.center_field else 0.0)

    def modal_values(self, eta, r=None):
        """Field values (lattice-shaped array) for coefficient vector(s) ``eta``."""
        r = self.config.mode_radius if r is None else r
        values = reconstruct_values(np.asarray(eta, dtype=float), r, self.params, self.lattice)
        return self.scale * values + self.shift

    def from_modes(self, eta, r=None):
        """Lattice field for one coefficient vector (radius ``r`` defaults to the config's)."""
        return LatticeField(self.lattice, self.modal_values(eta, r))

    def from_noise(self, noise, eigenvalues="continuum"):
        """Untruncated field: spectral smoothing of the whole noise realization."""
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            smooth = smooth_field(noise_density(noise), self.params, eigenvalues)
        return LatticeField(self.lattice, self.scale * smooth.values + self.shift)
