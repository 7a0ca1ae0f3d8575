"""Lévy noise on a periodic lattice, Matérn-type smoothing and modal expansions.

The torus ``[-1, 1]**d`` is split into ``n**d`` cells of edge ``2/n`` (``n``
odd). :func:`sample_noise` draws the cell integrals ``Z(1_cell)``; the
smoothing and modal operators act on a noise *density* (values per unit
volume), obtained with :func:`noise_density`. With that convention

* ``extract_modes(noise_density(z), r)`` approximates the pairings
  ``Z(1), Z(cos(k.x)), Z(sin(k.x))`` by the midpoint rule, and
* ``smooth_field(noise_density(z), params)`` has pointwise variance
  ``-psi''(0) * K_{2 alpha}(0)`` with the periodic kernel built from the
  same eigenvalues.
"""

import csv
import itertools
import math
import struct
import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .exceptions import InternalError, InvalidArgumentError

__all__ = [
    "LevyLaw",
    "Lattice",
    "LatticeField",
    "SmoothingParams",
    "ModalCoefficients",
    "CovarianceCheck",
    "psi_second_derivative_at_zero",
    "sample_noise",
    "sample_noise_batch",
    "noise_density",
    "laplacian_symbol",
    "spectral_eigenvalues",
    "smooth_field",
    "mode_index",
    "mode_basis",
    "extract_modes",
    "extract_modes_batch",
    "reconstruct_field",
    "reconstruct_values",
    "interpolate_bilinear",
    "field_covariance_oracle",
    "continuum_point_variance",
    "write_field",
    "read_field",
    "write_modes_csv",
    "read_modes_csv",
]

LAW_KINDS = ("gaussian", "poisson", "gamma", "bigamma")


def _positive(name, value):
    if value is None or not np.isfinite(value) or value <= 0:
        raise InvalidArgumentError(f"{name} must be a positive finite number, got {value!r}")
    return float(value)


@dataclass(frozen=True)
class LevyLaw:
    """One of the four infinitely divisible noise laws.

    Use the constructors :meth:`gaussian`, :meth:`poisson`, :meth:`gamma`
    and :meth:`bigamma`; ``lam`` is the jump intensity and ``beta`` the rate
    of the gamma-type Lévy measures.
    """

    kind: str
    sigma2: float = None
    lam: float = None
    beta: float = None

    def __post_init__(self):
        if self.kind not in LAW_KINDS:
            raise InvalidArgumentError(f"unknown law {self.kind!r}; expected one of {LAW_KINDS}")
        if self.kind == "gaussian":
            _positive("sigma2", self.sigma2)
        else:
            _positive("lam", self.lam)
        if self.kind in ("gamma", "bigamma"):
            _positive("beta", self.beta)

    @classmethod
    def gaussian(cls, sigma2=0.5):
        return cls("gaussian", sigma2=sigma2)

    @classmethod
    def poisson(cls, lam=0.5):
        return cls("poisson", lam=lam)

    @classmethod
    def gamma(cls, lam=0.5, beta=1.0):
        return cls("gamma", lam=lam, beta=beta)

    @classmethod
    def bigamma(cls, lam=0.5, beta=1.0):
        return cls("bigamma", lam=lam, beta=beta)

    @classmethod
    def from_name(cls, kind, variance=0.5, beta=1.0):
        """Law of the given kind with ``-psi''(0) == variance``."""
        if kind == "gaussian":
            return cls.gaussian(variance)
        if kind == "poisson":
            return cls.poisson(variance)
        return cls(kind, lam=variance * beta**2, beta=beta)

    def psi(self, t):
        """Lévy characteristic (log of the unit-volume characteristic function)."""
        t = np.asarray(t, dtype=float)
        if self.kind == "gaussian":
            return -0.5 * self.sigma2 * t**2 + 0j
        if self.kind == "poisson":
            return self.lam * (np.exp(1j * t) - 1.0)
        if self.kind == "gamma":
            return -self.lam * np.log(1.0 - 1j * t / self.beta)
        return -0.5 * self.lam * np.log(1.0 + (t / self.beta) ** 2) + 0j

    def mean_density(self):
        """Mean of the noise per unit volume."""
        if self.kind == "poisson":
            return self.lam
        if self.kind == "gamma":
            return self.lam / self.beta
        return 0.0

    def sample_cells(self, rng, measure, size):
        """Draw i.i.d. cell integrals over cells of the given volume."""
        if self.kind == "gaussian":
            return rng.normal(0.0, math.sqrt(self.sigma2 * measure), size=size)
        if self.kind == "poisson":
            return rng.poisson(self.lam * measure, size=size).astype(float)
        if self.kind == "gamma":
            return rng.gamma(self.lam * measure, 1.0 / self.beta, size=size)
        shape = 0.5 * self.lam * measure
        return rng.gamma(shape, 1.0 / self.beta, size=size) - rng.gamma(
            shape, 1.0 / self.beta, size=size
        )


def psi_second_derivative_at_zero(law):
    """Return ``psi''(0)``, i.e. minus the noise variance per unit volume."""
    if law.kind == "gaussian":
        return -law.sigma2
    if law.kind == "poisson":
        return -law.lam
    return -law.lam / law.beta**2


@dataclass(frozen=True)
class Lattice:
    """Cell centres of a uniform periodic grid on ``[-1, 1]**d``."""

    cells_per_side: int
    d: int = 2

    def __post_init__(self):
        n = self.cells_per_side
        if isinstance(n, bool) or int(n) != n or n < 1 or n % 2 == 0:
            raise InvalidArgumentError(f"cells_per_side must be an odd positive integer, got {n!r}")
        if int(self.d) != self.d or self.d < 1:
            raise InvalidArgumentError(f"dimension must be a positive integer, got {self.d!r}")

    @property
    def spacing(self):
        return 2.0 / self.cells_per_side

    @property
    def cell_measure(self):
        return self.spacing**self.d

    @property
    def shape(self):
        return (self.cells_per_side,) * self.d

    @property
    def size(self):
        return self.cells_per_side**self.d

    @property
    def radius(self):
        """Largest truncation radius the lattice resolves."""
        return (self.cells_per_side - 1) // 2

    @cached_property
    def centers(self):
        n = self.cells_per_side
        return -1.0 + self.spacing * (np.arange(n) + 0.5)

    @cached_property
    def points(self):
        """Cell centres, shape ``(size, d)``, in row-major lattice order."""
        grids = np.meshgrid(*([self.centers] * self.d), indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    @cached_property
    def wavenumbers(self):
        """Integer wave numbers on the FFT grid, shape ``shape + (d,)``.

        ``kappa = pi * wavenumbers``; entries range over ``-radius..radius``.
        """
        n = self.cells_per_side
        k = np.rint(np.fft.fftfreq(n) * n).astype(int)
        grids = np.meshgrid(*([k] * self.d), indexing="ij")
        return np.stack(grids, axis=-1)


@dataclass(frozen=True, eq=False)
class LatticeField:
    lattice: Lattice
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.lattice.shape:
            values = values.reshape(self.lattice.shape)
        if not np.all(np.isfinite(values)):
            raise InvalidArgumentError("lattice field contains non-finite values")
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class SmoothingParams:
    """Exponent ``alpha`` and squared mass ``m2`` of ``(-Laplace + m2)**(-alpha)``."""

    alpha: float = 3.0
    m2: float = 0.01

    def __post_init__(self):
        if not np.isfinite(self.alpha) or self.alpha < 0:
            raise InvalidArgumentError(f"alpha must be nonnegative, got {self.alpha!r}")
        _positive("m2", self.m2)


@dataclass(frozen=True, eq=False)
class ModalCoefficients:
    """Coefficient vector of the truncated modal expansion.

    ``index_map[l]`` is ``(kind, k)`` with ``kind`` in ``{"constant", "cos",
    "sin"}`` and ``k`` the integer wave vector (``kappa = pi * k``).
    """

    r: int
    eta: np.ndarray
    index_map: tuple

    @property
    def M(self):
        return len(self.eta)

    @property
    def kappas(self):
        return np.pi * np.array([k for _, k in self.index_map], dtype=float)


def sample_noise_batch(lattice, law, rng, n_samples):
    """Return ``(n_samples,) + lattice.shape`` i.i.d. cell integrals."""
    rng = np.random.default_rng(rng)
    return law.sample_cells(rng, lattice.cell_measure, (n_samples,) + lattice.shape)


def sample_noise(lattice, law, rng_seed):
    """Sample discretized Lévy noise.

    Each cell holds ``Z(1_cell)``, whose characteristic function is
    ``exp(cell_measure * psi(t))``.
    """
    rng = np.random.default_rng(rng_seed)
    return LatticeField(lattice, law.sample_cells(rng, lattice.cell_measure, lattice.shape))


def noise_density(noise):
    """Convert cell integrals to values per unit volume."""
    return LatticeField(noise.lattice, noise.values / noise.lattice.cell_measure)


def laplacian_symbol(lattice, kappa):
    """Eigenvalue of the lattice Laplacian for the character ``exp(i kappa.x)``.

    Returns ``spacing**-2 * (sum_j cos(spacing * kappa_j) - d)``; ``kappa``
    may carry leading batch dimensions.
    """
    kappa = np.asarray(kappa, dtype=float)
    s = lattice.spacing
    return (np.cos(s * kappa).sum(axis=-1) - lattice.d) / s**2


def spectral_eigenvalues(lattice, params, kind="lattice"):
    """Multipliers of ``(-Laplace + m2)**(-alpha)`` on the FFT grid.

    ``kind="lattice"`` uses the lattice-Laplacian symbol, ``"continuum"``
    the eigenvalues ``(|kappa|**2 + m2)**(-alpha)`` of the periodic
    continuum operator.
    """
    kappa = np.pi * lattice.wavenumbers
    if kind == "lattice":
        base = -laplacian_symbol(lattice, kappa) + params.m2
    elif kind == "continuum":
        base = (kappa**2).sum(axis=-1) + params.m2
    else:
        raise InvalidArgumentError(f"unknown eigenvalue kind {kind!r}")
    return base ** (-params.alpha)


def smooth_field(noise, params, eigenvalues="lattice"):
    """Apply ``(-Laplace + m2)**(-alpha)`` to a lattice field by FFT."""
    lattice = noise.lattice
    if params.alpha <= lattice.d:
        warnings.warn(
            f"alpha={params.alpha} <= d={lattice.d}: smoothed field may not be continuous",
            stacklevel=2,
        )
    mult = spectral_eigenvalues(lattice, params, eigenvalues)
    out = np.fft.ifftn(np.fft.fftn(noise.values) * mult)
    if not np.all(np.isfinite(out)):
        raise InternalError("non-finite FFT output while smoothing")
    residue = np.max(np.abs(out.imag))
    if residue > 1e-10 * max(1.0, np.max(np.abs(out.real))):
        raise InternalError(f"imaginary residue {residue:.3e} after smoothing a real field")
    return LatticeField(lattice, out.real)


def mode_index(r, d=2):
    """Ordered modes: constant first, then lexicographic ``k`` with cos before sin.

    Only wave vectors whose first nonzero component is positive are used.
    """
    index = [("constant", (0,) * d)]
    for k in itertools.product(range(-r, r + 1), repeat=d):
        nonzero = [c for c in k if c != 0]
        if nonzero and nonzero[0] > 0:
            index.append(("cos", k))
            index.append(("sin", k))
    return tuple(index)


def mode_basis(lattice, r):
    """Evaluate the modes at the cell centres.

    Returns the mode index and an array of shape ``(M, lattice.size)``.
    """
    index = mode_index(r, lattice.d)
    phase = lattice.points @ (np.pi * np.array([k for _, k in index], dtype=float)).T
    basis = np.empty((len(index), lattice.size))
    for row, (kind, _) in enumerate(index):
        if kind == "constant":
            basis[row] = 1.0
        elif kind == "cos":
            basis[row] = np.cos(phase[:, row])
        else:
            basis[row] = np.sin(phase[:, row])
    return index, basis


def _check_radius(lattice, r):
    if isinstance(r, bool) or int(r) != r or r < 0:
        raise InvalidArgumentError(f"mode radius must be a nonnegative integer, got {r!r}")
    if 2 * r + 1 > lattice.cells_per_side:
        raise InvalidArgumentError(
            f"radius {r} needs {2 * r + 1} cells per side, lattice has {lattice.cells_per_side}"
        )
    return int(r)


def extract_modes_batch(densities, lattice, r):
    """Vectorized :func:`extract_modes` for an array of density fields.

    ``densities`` has shape ``(n,) + lattice.shape``; returns ``(n, M)``.
    """
    r = _check_radius(lattice, r)
    _, basis = mode_basis(lattice, r)
    flat = np.asarray(densities, dtype=float).reshape(-1, lattice.size)
    return lattice.cell_measure * flat @ basis.T


def extract_modes(noise, r):
    """Project a noise density on the retained modes by the midpoint rule."""
    lattice = noise.lattice
    r = _check_radius(lattice, r)
    index, basis = mode_basis(lattice, r)
    eta = lattice.cell_measure * basis @ noise.values.ravel()
    return ModalCoefficients(r, eta, index)


def _mode_prefactors(index, params, d):
    pre = np.empty(len(index))
    for row, (kind, k) in enumerate(index):
        ksq = np.pi**2 * float(np.dot(k, k))
        weight = 2.0 ** (-d) if kind == "constant" else 2.0 ** (1 - d)
        pre[row] = weight * (ksq + params.m2) ** (-params.alpha)
    return pre


def reconstruct_values(eta, r, params, lattice):
    """Evaluate the truncated modal expansion for rows of ``eta``.

    ``eta`` has shape ``(n, M)`` or ``(M,)``; the result has shape
    ``(n,) + lattice.shape`` (or ``lattice.shape``).
    """
    eta = np.asarray(eta, dtype=float)
    index, basis = mode_basis(lattice, r)
    if eta.shape[-1] != len(index):
        raise InvalidArgumentError(f"expected {len(index)} coefficients for r={r}, got {eta.shape[-1]}")
    values = (eta * _mode_prefactors(index, params, lattice.d)) @ basis
    return values.reshape(eta.shape[:-1] + lattice.shape)


def reconstruct_field(modes, params, lattice):
    """Evaluate the generalized Karhunen-Loève expansion on the lattice.

    The constant mode enters with ``1 / (2**d * m2**alpha)`` and each
    cos/sin pair with ``1 / (2**(d-1) * (|kappa|**2 + m2)**alpha)``.
    """
    return LatticeField(lattice, reconstruct_values(modes.eta, modes.r, params, lattice))


def interpolate_bilinear(field, points):
    """Periodic multilinear interpolation between cell centres.

    Parameters
    ----------
    field : LatticeField
    points : array_like, shape (n, d)

    Returns
    -------
    ndarray, shape (n,)
    """
    lattice = field.lattice
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] != lattice.d:
        raise InvalidArgumentError(f"points must have {lattice.d} columns")
    n = lattice.cells_per_side
    u = (pts + 1.0) / lattice.spacing - 0.5
    base = np.floor(u).astype(int)
    frac = u - base
    out = np.zeros(len(pts))
    for corner in itertools.product((0, 1), repeat=lattice.d):
        corner = np.array(corner)
        idx = tuple(((base + corner) % n).T)
        weight = np.prod(np.where(corner == 1, frac, 1.0 - frac), axis=1)
        out += weight * field.values[idx]
    return out


def continuum_point_variance(law, params, lattice, r=None):
    """Pointwise variance of the periodic smoothed field, continuum eigenvalues.

    Sums ``-psi''(0) * 2**-d * (|kappa|**2 + m2)**(-2 alpha)`` over the
    lattice's dual grid, or over ``|k|_inf <= r`` when ``r`` is given.
    """
    lam = spectral_eigenvalues(lattice, params, "continuum")
    if r is not None:
        mask = np.max(np.abs(lattice.wavenumbers), axis=-1) <= r
        lam = lam[mask]
    return -psi_second_derivative_at_zero(law) * float(np.sum(lam**2)) / 2.0**lattice.d


@dataclass(frozen=True)
class CovarianceCheck:
    empirical: float
    analytic: float
    std_error: float

    @property
    def z_score(self):
        return (self.empirical - self.analytic) / self.std_error


def field_covariance_oracle(law, params, lattice, n_samples, seed, point=None, chunk=2000):
    """Monte Carlo check of ``Var Z_K(x0) = -psi''(0) * K_{2 alpha}(0)``.

    The analytic value is a direct sum over the dual lattice of the squared
    lattice-symbol eigenvalues. The empirical value smooths ``n_samples``
    independent noise densities and takes the sample variance at cell
    ``point`` (default: the centre cell); its standard error comes from the
    sample fourth central moment.
    """
    if n_samples < 100:
        raise InvalidArgumentError("need at least 100 samples")
    if point is None:
        point = (lattice.radius,) * lattice.d
    n = lattice.cells_per_side
    kappa = np.pi * np.array(
        list(itertools.product(range(-lattice.radius, lattice.radius + 1), repeat=lattice.d)),
        dtype=float,
    )
    eig = (-laplacian_symbol(lattice, kappa) + params.m2) ** (-params.alpha)
    analytic = -psi_second_derivative_at_zero(law) * float(np.sum(eig**2)) / 2.0**lattice.d

    # Z_K(x0) = sum_y G(y - x0) h(y); G is symmetric, so the smoothed impulse
    # at x0 gives the weights.
    impulse = np.zeros(lattice.shape)
    impulse[tuple(point)] = 1.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        green = smooth_field(LatticeField(lattice, impulse), params).values.ravel()

    rng = np.random.default_rng(seed)
    samples = np.empty(n_samples)
    for start in range(0, n_samples, chunk):
        stop = min(start + chunk, n_samples)
        cells = law.sample_cells(rng, lattice.cell_measure, (stop - start, n**lattice.d))
        samples[start:stop] = cells @ green / lattice.cell_measure
    dev = (samples - samples.mean()) ** 2
    empirical = float(dev.sum() / (n_samples - 1))
    std_error = float(dev.std(ddof=1) / math.sqrt(n_samples))
    return CovarianceCheck(empirical, analytic, std_error)


_FIELD_HEADER = struct.Struct("<II")


def write_field(field, path):
    """Write ``(d, cells_per_side)`` as two uint32 then little-endian float64 values."""
    with open(path, "wb") as fh:
        fh.write(_FIELD_HEADER.pack(field.lattice.d, field.lattice.cells_per_side))
        fh.write(np.ascontiguousarray(field.values, dtype="<f8").tobytes())


def read_field(path):
    with open(path, "rb") as fh:
        d, n = _FIELD_HEADER.unpack(fh.read(_FIELD_HEADER.size))
        values = np.frombuffer(fh.read(), dtype="<f8")
    lattice = Lattice(n, d)
    if values.size != lattice.size:
        raise InvalidArgumentError(f"field file holds {values.size} values, expected {lattice.size}")
    return LatticeField(lattice, values.reshape(lattice.shape).astype(float))


def write_modes_csv(modes, path):
    """Write ``index,kind,kappa1,kappa2,value`` rows (``kappa = pi * k``)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        d = len(modes.index_map[0][1])
        writer.writerow(["index", "kind"] + [f"kappa{j + 1}" for j in range(d)] + ["value"])
        for i, ((kind, k), value) in enumerate(zip(modes.index_map, modes.eta)):
            writer.writerow([i, kind] + [f"{np.pi * c:.17g}" for c in k] + [f"{value:.17g}"])


def read_modes_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    index = tuple((row[1], tuple(int(round(float(c) / np.pi)) for c in row[2:-1])) for row in rows)
    eta = np.array([float(row[-1]) for row in rows])
    r = max((max(abs(c) for c in k) for _, k in index), default=0)
    return ModalCoefficients(r, eta, index)
