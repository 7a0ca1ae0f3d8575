"""Training hyperparameters shared by the generative models."""

from dataclasses import asdict, dataclass, field, fields, replace

from ..exceptions import InvalidArgumentError

__all__ = ["TrainConfig"]


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for coupling-flow and flow-matching training.

    ``hidden_layers`` x ``width`` describes every fully connected network
    (the coupling sub-nets ``s`` and ``t``, or the vector field ``v``).
    The learning rate is multiplied by ``lr_gamma`` at each epoch listed in
    ``lr_milestones``.
    """

    epochs: int = 100
    batch_size: int = 50
    lr: float = 1e-3
    lr_milestones: tuple = ()
    lr_gamma: float = 0.1
    betas: tuple = (0.9, 0.999)
    adam_eps: float = 1e-8
    hidden_layers: int = 6
    width: int = 50
    n_blocks: int = 4
    scale_clamp: float = 2.0
    cfm_sigma: float = 0.01
    ot_enabled: bool = False
    n_steps: int = 100
    seed: int = 0

    def __post_init__(self):
        for name in ("epochs", "batch_size", "hidden_layers", "width", "n_blocks", "n_steps"):
            value = getattr(self, name)
            if isinstance(value, bool) or int(value) != value or value < 1:
                raise InvalidArgumentError(f"{name} must be a positive integer, got {value!r}")
        for name in ("lr", "lr_gamma", "adam_eps"):
            if not getattr(self, name) > 0:
                raise InvalidArgumentError(f"{name} must be positive")
        if not self.cfm_sigma >= 0:
            raise InvalidArgumentError("cfm_sigma must be nonnegative")
        if not self.scale_clamp >= 0:
            raise InvalidArgumentError("scale_clamp must be nonnegative (0 disables clamping)")
        if len(self.betas) != 2 or not all(0 <= b < 1 for b in self.betas):
            raise InvalidArgumentError(f"betas must be two numbers in [0, 1), got {self.betas!r}")
        if any(int(m) != m or m < 1 for m in self.lr_milestones):
            raise InvalidArgumentError("lr_milestones must be positive epoch numbers")
        if int(self.seed) != self.seed or self.seed < 0:
            raise InvalidArgumentError("seed must be a nonnegative integer")
        object.__setattr__(self, "lr_milestones", tuple(int(m) for m in self.lr_milestones))
        object.__setattr__(self, "betas", tuple(float(b) for b in self.betas))

    @classmethod
    def preset(cls, model, scale="desk", **overrides):
        """Full-size (``scale="full"``) or reduced (``"desk"``) settings.

        Desk scale divides network widths and epoch counts by ten.
        """
        if model not in ("acf", "cfm", "otcfm"):
            raise InvalidArgumentError(f"unknown model kind {model!r}")
        if scale not in ("desk", "full"):
            raise InvalidArgumentError(f"unknown scale {scale!r}")
        div = 10 if scale == "desk" else 1
        if model == "acf":
            base = cls(
                epochs=3000 // div,
                batch_size=200,
                lr_milestones=(1000 // div, 2000 // div),
                hidden_layers=3,
                width=200 // div,
            )
        else:
            base = cls(epochs=1000 // div, batch_size=50, hidden_layers=6, width=500 // div, ot_enabled=model == "otcfm")
        return replace(base, **overrides)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise InvalidArgumentError(f"unknown training options: {sorted(unknown)}")
        return cls(**data)
