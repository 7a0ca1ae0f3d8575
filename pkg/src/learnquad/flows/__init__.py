"""Generative transport models and learned quadrature rules."""

from .config import TrainConfig
from .coupling import AffineCouplingFlow, CouplingBlock, train_acf
from .kernels import median_bandwidths, mmd, ot_assignment
from .matching import FlowMatching, conditional_flow_loss, train_cfm, train_otcfm
from .nets import Mlp
from .ode import rk4_integrate
from .persist import load_model, save_model
from .transport import IdentityTransport, LearnedQuadrature, LinearTransport, generate, map_nodes

__all__ = [
    "TrainConfig",
    "Mlp",
    "AffineCouplingFlow",
    "CouplingBlock",
    "FlowMatching",
    "LinearTransport",
    "IdentityTransport",
    "LearnedQuadrature",
    "train_acf",
    "train_cfm",
    "train_otcfm",
    "train_model",
    "conditional_flow_loss",
    "generate",
    "map_nodes",
    "mmd",
    "median_bandwidths",
    "ot_assignment",
    "rk4_integrate",
    "save_model",
    "load_model",
]

_TRAINERS = {"acf": train_acf, "cfm": train_cfm, "otcfm": train_otcfm}


def train_model(kind, data, config, log_path=None):
    """Dispatch to :func:`train_acf`, :func:`train_cfm` or :func:`train_otcfm`."""
    from ..exceptions import InvalidArgumentError

    if kind not in _TRAINERS:
        raise InvalidArgumentError(f"unknown model kind {kind!r}; expected one of {sorted(_TRAINERS)}")
    return _TRAINERS[kind](data, config, log_path=log_path)
