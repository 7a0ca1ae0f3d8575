"""Error studies: learned quadrature vs Monte Carlo, discretization and truncation."""

import csv
import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from ..exceptions import EllipticityError, InvalidArgumentError
from ..fem import mesh_for_level, solve_realization
from ..flows import map_nodes, train_model
from ..levy import LatticeField, extract_modes, noise_density
from ..quadrature import monomial_exponents, smolyak_rule
from .config import derive_seed
from .data import LogConductivity, generate_dataset, sample_noise_fields

__all__ = [
    "ErrorRecord",
    "SCHEMAS",
    "write_records",
    "read_records",
    "mc_estimate",
    "monomial_values",
    "train_from_config",
    "monomial_experiment",
    "pde_qoi",
    "pde_mc_reference",
    "pde_experiment",
    "fem_convergence_study",
    "convergence_rate",
    "truncation_study",
    "eigenvalue_convention_gap",
    "training_size_study",
]

log = logging.getLogger(__name__)

# CSV column -> ErrorRecord attribute, per experiment kind.
SCHEMAS = {
    "monomials": (("level", "level"), ("trainsize", "trainsize"), ("error", "abs_error"), ("conf", "ci_halfwidth")),
    "pde": (
        ("level", "level"), ("trainsize", "trainsize"), ("mesh", "mesh"), ("estimate", "estimate"),
        ("mc", "mc_reference"), ("error", "abs_error"), ("conf", "ci_halfwidth"),
    ),
    "convergence": (("elements", "elements"), ("law", "law"), ("error", "abs_error")),
    "truncation": (("modes", "modes"), ("law", "law"), ("error", "abs_error")),
}
_INT_FIELDS = {"level", "trainsize", "modes", "elements"}
_STR_FIELDS = {"mesh", "law"}


@dataclass(frozen=True)
class ErrorRecord:
    """One point of an error study.

    ``abs_error`` is ``|estimate - mc_reference|`` whenever both are stored;
    aggregated records (mean monomial errors, self-convergence) keep only
    the error. ``skipped_weight`` is the total quadrature weight of nodes
    dropped because their conductivity was not admissible.
    """

    experiment: str
    abs_error: float
    level: int = None
    trainsize: int = None
    mesh: str = None
    modes: int = None
    law: str = None
    elements: int = None
    estimate: float = None
    mc_reference: float = None
    ci_halfwidth: float = None
    skipped_weight: float = 0.0

    def __post_init__(self):
        if self.experiment not in SCHEMAS:
            raise InvalidArgumentError(f"unknown experiment kind {self.experiment!r}")
        if self.ci_halfwidth is not None and self.ci_halfwidth < 0:
            raise InvalidArgumentError("ci_halfwidth must be nonnegative")


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_records(records, path):
    """Write records of one experiment kind with that kind's CSV columns.

    ``path`` may also be an open text file.
    """
    records = list(records)
    if not records:
        raise InvalidArgumentError("no records to write")
    kind = records[0].experiment
    if any(r.experiment != kind for r in records):
        raise InvalidArgumentError("records of different experiments cannot share a file")
    schema = SCHEMAS[kind]
    if hasattr(path, "write"):
        _write_rows(path, schema, records)
        return
    with open(path, "w", newline="") as fh:
        _write_rows(fh, schema, records)


def _write_rows(fh, schema, records):
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow([col for col, _ in schema])
    for rec in records:
        writer.writerow([_fmt(getattr(rec, attr)) for _, attr in schema])


def read_records(path):
    """Parse a CSV written by :func:`write_records`; the kind is read from the header."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header = tuple(rows[0]) if rows else ()
    matches = [k for k, schema in SCHEMAS.items() if tuple(c for c, _ in schema) == header]
    if not matches:
        raise InvalidArgumentError(f"unrecognized record header {header!r}")
    kind = matches[0]
    out = []
    for row in rows[1:]:
        values = {}
        for (_, attr), text in zip(SCHEMAS[kind], row):
            if text == "":
                continue
            values[attr] = int(text) if attr in _INT_FIELDS else text if attr in _STR_FIELDS else float(text)
        out.append(ErrorRecord(experiment=kind, **values))
    return out


def mc_estimate(samples, q=None):
    """Sample mean and 95% confidence half-width ``1.96 s / sqrt(N)``.

    Parameters
    ----------
    samples : array_like
        Samples of the random input (rows) or, when ``q`` is omitted,
        values of the quantity itself. 2-D values are treated column-wise.
    q : callable, optional
        Quantity of interest applied to the whole sample array.
    """
    values = np.asarray(q(samples) if q is not None else samples, dtype=float)
    n = values.shape[0]
    if n < 2:
        raise InvalidArgumentError("Monte Carlo estimate needs at least 2 samples")
    mean = values.mean(axis=0)
    half = 1.96 * values.std(axis=0, ddof=1) / math.sqrt(n)
    return mean, half


def monomial_values(points, exponents):
    """``prod_m x_m**e_m`` for every row of ``points`` and every exponent row."""
    points = np.asarray(points, dtype=float)
    exponents = np.asarray(exponents)
    out = np.ones((len(points), len(exponents)))
    for m in range(points.shape[1]):
        powers = points[:, m : m + 1] ** np.arange(exponents[:, m].max() + 1)
        out *= powers[:, exponents[:, m]]
    return out


def train_from_config(config, data=None, train_config=None, log_path=None):
    """Train the configured transport on ``data`` (default: ``train_size`` fresh samples)."""
    if data is None:
        data = generate_dataset(config, config.train_size)
    return train_model(config.model, data, train_config or config.train_config, log_path=log_path)


def monomial_experiment(config, transport=None, mc_eta=None, levels=None, trainsize=None):
    """Mean absolute monomial error of the mapped rules against Monte Carlo.

    For each level ``L`` the monomials of total degree ``k = L - 1`` or less
    (the constant included) are integrated with the mapped rule and
    compared to the Monte Carlo mean over ``config.mc_samples`` samples;
    ``conf`` is the mean of the per-monomial confidence half-widths.
    """
    if transport is None:
        transport = train_from_config(config)
        trainsize = config.train_size if trainsize is None else trainsize
    if mc_eta is None:
        mc_eta = generate_dataset(config, config.mc_samples, stream="mc")
    records = []
    for level in levels or config.levels:
        exps = monomial_exponents(mc_eta.shape[1], level - 1)
        rule = map_nodes(transport, smolyak_rule(mc_eta.shape[1], level))
        estimate = rule.weights @ monomial_values(rule.nodes, exps)
        mc_mean, mc_half = mc_estimate(monomial_values(mc_eta, exps))
        records.append(
            ErrorRecord(
                "monomials",
                abs_error=float(np.mean(np.abs(estimate - mc_mean))),
                ci_halfwidth=float(np.mean(mc_half)),
                level=int(level),
                trainsize=trainsize,
            )
        )
        log.info("monomials level %d: error %.3e conf %.3e", level, records[-1].abs_error, records[-1].ci_halfwidth)
    return records


def pde_qoi(config, reconstruction=None, mesh=None):
    """Callable ``eta -> Q`` through field reconstruction and the flow-cell solver.

    Raises :class:`EllipticityError` when the reconstructed conductivity is
    not finite and positive.
    """
    recon = reconstruction or LogConductivity(config)
    mesh = mesh_for_level(config.pde_mesh) if mesh is None else mesh

    def q(eta):
        values = recon.modal_values(eta)
        if not np.all(np.isfinite(values)):
            raise EllipticityError(None, float("nan"))
        # exp overflow yields inf conductivity, which assembly reports as inadmissible.
        with np.errstate(over="ignore"):
            return solve_realization(LatticeField(recon.lattice, values), mesh)

    return q


def _evaluate_nodes(q, nodes, weights):
    values = np.full(len(nodes), np.nan)
    skipped = []
    for j, node in enumerate(nodes):
        try:
            values[j] = q(node)
        except EllipticityError:
            skipped.append(j)
    if skipped:
        log.warning(
            "skipped %d of %d nodes with inadmissible conductivity (weight %.3e)",
            len(skipped), len(nodes), float(np.sum(weights[skipped])),
        )
    return values, skipped


def pde_mc_reference(config, mc_eta=None):
    """Monte Carlo mean and half-width of the flux over ``config.mc_samples`` samples.

    Returns ``(mean, halfwidth, n_used)``; inadmissible samples are skipped.
    """
    if mc_eta is None:
        mc_eta = generate_dataset(config, config.mc_samples, stream="mc")
    values, _ = _evaluate_nodes(pde_qoi(config), mc_eta, np.full(len(mc_eta), 1.0 / len(mc_eta)))
    ok = values[np.isfinite(values)]
    mean, half = mc_estimate(ok)
    return float(mean), float(half), len(ok)


def pde_experiment(config, transport=None, mc_reference=None, levels=None, trainsize=None):
    """Learned-quadrature estimate of the expected flux for each sparse-grid level.

    ``mc_reference`` is ``(mean, halfwidth)`` from :func:`pde_mc_reference`
    (computed when omitted). Nodes whose conductivity is inadmissible are
    skipped; the estimate sums the remaining weighted values and the record
    carries the skipped weight.
    """
    if transport is None:
        transport = train_from_config(config)
        trainsize = config.train_size if trainsize is None else trainsize
    if mc_reference is None:
        mc_reference = pde_mc_reference(config)
    mc_mean, mc_half = mc_reference[0], mc_reference[1]
    q = pde_qoi(config)
    dim = transport.n_features_in_
    records = []
    for level in levels or config.levels:
        rule = map_nodes(transport, smolyak_rule(dim, level))
        values, skipped = _evaluate_nodes(q, rule.nodes, rule.weights)
        keep = np.isfinite(values)
        estimate = float(rule.weights[keep] @ values[keep])
        records.append(
            ErrorRecord(
                "pde",
                abs_error=abs(estimate - mc_mean),
                level=int(level),
                trainsize=trainsize,
                mesh=config.pde_mesh,
                estimate=estimate,
                mc_reference=mc_mean,
                ci_halfwidth=mc_half,
                skipped_weight=float(np.sum(rule.weights[skipped])),
            )
        )
        log.info("pde level %d: estimate %.6f mc %.6f", level, estimate, mc_mean)
    return records


def fem_convergence_study(config, laws=None, index=0):
    """Self-convergence of the flux for one untruncated realization per law.

    The finest mesh level in ``config.mesh_levels`` is the reference; one
    record per coarser level.
    """
    meshes = sorted((mesh_for_level(level) for level in config.mesh_levels), key=lambda m: m.n_elements)
    if len(meshes) < 2:
        raise InvalidArgumentError("need at least two mesh levels")
    records = []
    for law in laws or (config.law,):
        cfg = config.with_updates(law=law)
        (noise,) = sample_noise_fields(cfg, "convergence", [index])
        field = LogConductivity(cfg).from_noise(noise)
        reference = solve_realization(field, meshes[-1])
        for mesh in meshes[:-1]:
            q = solve_realization(field, mesh)
            records.append(ErrorRecord("convergence", abs_error=abs(q - reference), law=law, elements=mesh.n_elements))
    return records


def convergence_rate(records):
    """Least-squares slope of ``log(error)`` against ``log(elements)``."""
    pts = [(r.elements, r.abs_error) for r in records if r.abs_error > 0]
    if len(pts) < 2:
        raise InvalidArgumentError("need two positive errors to fit a rate")
    x, y = np.log(np.array(pts, dtype=float)).T
    return float(np.polyfit(x, y, 1)[0])


def truncation_study(config, radii=None, index=0):
    """Flux error of truncated modal fields against the untruncated field.

    The reference smooths the whole noise realization with the continuum
    eigenvalues, the same eigenvalues the truncated expansion uses.
    """
    mesh = mesh_for_level(config.truncation_mesh)
    recon = LogConductivity(config)
    (noise,) = sample_noise_fields(config, "truncation", [index])
    density = noise_density(noise)
    reference = solve_realization(recon.from_noise(noise), mesh)
    records = []
    for r in radii or config.truncation_radii:
        q = solve_realization(recon.from_modes(extract_modes(density, r).eta, r), mesh)
        records.append(
            ErrorRecord(
                "truncation", abs_error=abs(q - reference), modes=(2 * r + 1) ** 2, law=config.law,
                estimate=q, mc_reference=reference,
            )
        )
    return records


def eigenvalue_convention_gap(config, index=0):
    """``|Q_continuum - Q_lattice|`` for the untruncated truncation-study realization."""
    mesh = mesh_for_level(config.truncation_mesh)
    recon = LogConductivity(config)
    (noise,) = sample_noise_fields(config, "truncation", [index])
    return abs(
        solve_realization(recon.from_noise(noise, "continuum"), mesh)
        - solve_realization(recon.from_noise(noise, "lattice"), mesh)
    )


def training_size_study(config, sizes=None, include_pde=True):
    """Retrain at each training-set size and evaluate at the top sparse-grid level.

    Datasets are prefixes of one large dataset; training seeds are derived
    per size index. Returns ``(monomial_records, pde_records)``.
    """
    sizes = tuple(sorted(sizes or config.train_sizes))
    top = max(config.levels)
    data = generate_dataset(config, max(sizes))
    mc_eta = generate_dataset(config, config.mc_samples, stream="mc")
    pde_ref = pde_mc_reference(config, mc_eta) if include_pde else None
    mono, pde = [], []
    for i, size in enumerate(sizes):
        train_config = replace(config.train_config, seed=derive_seed(config.seed, "train", i + 1) % 2**63)
        model = train_from_config(config, data[:size], train_config)
        mono += monomial_experiment(config, model, mc_eta, levels=(top,), trainsize=size)
        if include_pde:
            pde += pde_experiment(config, model, pde_ref, levels=(top,), trainsize=size)
    return mono, pde
