"""Experiment configuration (INI files) and deterministic seed derivation."""

import configparser
import io
from dataclasses import dataclass, field, fields, replace

import numpy as np

from ..exceptions import InvalidArgumentError
from ..fem import MESH_LEVELS
from ..flows import TrainConfig
from ..levy import LAW_KINDS, Lattice, LevyLaw, SmoothingParams

__all__ = ["ExperimentConfig", "derive_seed", "SEED_OFFSETS", "load_config", "dump_config"]

# Constant offsets separating the seed streams of the different task kinds.
SEED_OFFSETS = {
    "dataset": 101,
    "mc": 202,
    "train": 303,
    "convergence": 404,
    "truncation": 505,
}

MODEL_KINDS = ("acf", "cfm", "otcfm")


def derive_seed(master, kind, index=0):
    """64-bit seed for task ``index`` of the given kind, independent of all others."""
    if kind not in SEED_OFFSETS:
        raise InvalidArgumentError(f"unknown seed stream {kind!r}")
    state = np.random.SeedSequence([int(master), SEED_OFFSETS[kind], int(index)]).generate_state(2, np.uint32)
    return int(state[0]) << 32 | int(state[1])


@dataclass(frozen=True)
class ExperimentConfig:
    """All settings of one experiment.

    ``field_variance`` rescales reconstructed log-conductivity fields to the
    given pointwise variance (``None`` keeps the raw smoothed field; 0
    gives the degenerate constant field). ``center_field`` subtracts the
    noise mean before the exponential; ``field_offset`` is added after.
    ``training`` holds overrides on top of the ``(model, scale)`` preset.
    """

    seed: int = 0
    model: str = "otcfm"
    scale: str = "desk"
    law: str = "bigamma"
    variance: float = 0.5
    beta: float = 1.0
    alpha: float = 3.0
    mass: float = 0.1
    cells_per_side: int = 101
    mode_radius: int = 1
    field_variance: float = 0.5
    center_field: bool = False
    field_offset: float = 0.0
    train_size: int = 10_000
    train_sizes: tuple = (100, 1000, 10_000)
    levels: tuple = (1, 2, 3, 4)
    mesh_levels: tuple = ("coarse", "medium", "fine")
    truncation_radii: tuple = (1, 2, 3)
    mc_samples: int = 10_000
    pde_mesh: str = "coarse"
    truncation_mesh: str = "fine"
    training: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if self.model not in MODEL_KINDS:
            raise InvalidArgumentError(f"model must be one of {MODEL_KINDS}, got {self.model!r}")
        if self.law not in LAW_KINDS:
            raise InvalidArgumentError(f"law must be one of {LAW_KINDS}, got {self.law!r}")
        for name in ("train_sizes", "levels", "mesh_levels", "truncation_radii"):
            value = tuple(getattr(self, name))
            if not value:
                raise InvalidArgumentError(f"{name} must be nonempty")
            object.__setattr__(self, name, value)
        if self.mc_samples < 100:
            raise InvalidArgumentError("mc_samples must be at least 100")
        if any(level < 1 for level in self.levels):
            raise InvalidArgumentError("sparse-grid levels start at 1")
        for mesh in self.mesh_levels + (self.pde_mesh, self.truncation_mesh):
            if mesh not in MESH_LEVELS:
                raise InvalidArgumentError(f"unknown mesh level {mesh!r}")
        if self.field_variance is not None and self.field_variance < 0:
            raise InvalidArgumentError("field_variance must be nonnegative")
        if isinstance(self.training, dict):
            object.__setattr__(self, "training", tuple(sorted(self.training.items())))
        # Build the derived objects once so invalid settings fail at load time.
        _ = (self.levy_law, self.smoothing, self.lattice, self.train_config)
        if 2 * self.mode_radius + 1 > self.cells_per_side:
            raise InvalidArgumentError("mode radius exceeds what the lattice resolves")

    @classmethod
    def full_scale(cls, **overrides):
        """Full-scale settings: full-width networks, 1e5 samples, fine PDE mesh."""
        base = dict(scale="full", mc_samples=100_000, train_size=100_000,
                    train_sizes=(100, 1000, 10_000, 100_000), pde_mesh="fine")
        base.update(overrides)
        return cls(**base)

    @property
    def levy_law(self):
        return LevyLaw.from_name(self.law, variance=self.variance, beta=self.beta)

    @property
    def smoothing(self):
        return SmoothingParams(alpha=self.alpha, m2=self.mass**2)

    @property
    def lattice(self):
        return Lattice(self.cells_per_side)

    @property
    def n_modes(self):
        return (2 * self.mode_radius + 1) ** 2

    @property
    def train_config(self):
        overrides = dict(self.training)
        overrides.setdefault("seed", derive_seed(self.seed, "train") % 2**63)
        return TrainConfig.preset(self.model, self.scale, **overrides)

    def with_updates(self, **changes):
        return replace(self, **changes)


# INI layout: section -> (key, attribute) pairs.
_LAYOUT = {
    "experiment": ("seed", "model", "scale"),
    "noise": ("law", "variance", "beta"),
    "smoothing": ("alpha", "mass"),
    "lattice": ("cells_per_side", "mode_radius"),
    "field": ("field_variance", "center_field", "field_offset"),
    "sweeps": ("train_size", "train_sizes", "levels", "mesh_levels", "truncation_radii"),
    "monte_carlo": ("mc_samples", "pde_mesh", "truncation_mesh"),
}
_TRAIN_TYPES = {f.name: f for f in fields(TrainConfig)}


def _format(value):
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ", ".join(_format(v) for v in value)
    return str(value)


def _parse_int(text):
    """Exact integers; accepts ``1e4``-style spellings of whole numbers."""
    try:
        return int(text)
    except ValueError:
        value = float(text)
        if value != int(value):
            raise ValueError(text) from None
        return int(value)


def _parse(name, text, default):
    text = text.strip()
    try:
        if isinstance(default, bool):
            lowered = text.lower()
            if lowered not in ("true", "false", "yes", "no", "1", "0"):
                raise ValueError(text)
            return lowered in ("true", "yes", "1")
        if text.lower() == "none":
            return None
        if isinstance(default, tuple):
            items = [t.strip() for t in text.split(",") if t.strip()]
            kind = type(default[0]) if default else str
            return tuple(_parse_int(t) if kind is int else kind(t) for t in items)
        if isinstance(default, int):
            return _parse_int(text)
        if isinstance(default, float):
            return float(text)
        return text
    except ValueError:
        raise InvalidArgumentError(f"cannot parse {name} = {text!r}") from None


def load_config(path=None, text=None, **overrides):
    """Read an INI experiment file; unspecified keys keep their defaults."""
    parser = configparser.ConfigParser()
    if path is not None:
        if not parser.read(path):
            raise InvalidArgumentError(f"cannot read config file {path}")
    elif text is not None:
        parser.read_string(text)
    defaults = ExperimentConfig()
    values = {}
    for section in parser.sections():
        if section == "training":
            continue
        if section not in _LAYOUT:
            raise InvalidArgumentError(f"unknown config section [{section}]")
        for key, raw in parser.items(section):
            if key not in _LAYOUT[section]:
                raise InvalidArgumentError(f"unknown key {key!r} in [{section}]")
            values[key] = _parse(key, raw, getattr(defaults, key))
    training = {}
    if parser.has_section("training"):
        probe = TrainConfig()
        for key, raw in parser.items("training"):
            if key not in _TRAIN_TYPES:
                raise InvalidArgumentError(f"unknown training option {key!r}")
            training[key] = _parse(key, raw, getattr(probe, key) if key != "lr_milestones" else (0,))
    values.update(overrides)
    if training:
        values["training"] = tuple(sorted({**dict(values.get("training", ())), **training}.items()))
    return ExperimentConfig(**values)


def dump_config(config):
    """INI text with every setting, including the resolved training options."""
    parser = configparser.ConfigParser()
    for section, keys in _LAYOUT.items():
        parser[section] = {key: _format(getattr(config, key)) for key in keys}
    train = config.train_config
    parser["training"] = {f.name: _format(getattr(train, f.name)) for f in fields(TrainConfig)}
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()
