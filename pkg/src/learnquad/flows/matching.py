"""Conditional flow matching, optionally with minibatch optimal-transport pairing."""

import numpy as np
import torch
from sklearn.utils.validation import check_is_fitted

from ..exceptions import InvalidArgumentError
from .base import TorchTransport, check_latent
from .kernels import ot_assignment
from .nets import Mlp
from .ode import rk4_integrate

__all__ = ["FlowMatching", "conditional_flow_loss", "train_cfm", "train_otcfm"]

COUPLINGS = ("independent", "ot")


def conditional_flow_loss(net, x0, x1, t, eps, sigma):
    """Mean squared regression error of ``net`` onto the straight-path targets.

    The interpolant is ``x = t x1 + (1 - t) x0 + sigma eps`` with target
    velocity ``x1 - x0``; the squared error is summed over coordinates and
    averaged over the batch. ``t`` has shape ``(n, 1)``.
    """
    x = t * x1 + (1.0 - t) * x0 + sigma * eps
    pred = net(torch.cat([x, t], dim=1))
    return ((pred - (x1 - x0)) ** 2).sum(dim=1).mean()


class FlowMatching(TorchTransport):
    """Time-dependent velocity field transporting a standard normal to the data.

    Parameters
    ----------
    coupling : {"independent", "ot"}
        How source and target minibatch samples are paired: independently,
        or by the exact assignment minimizing total squared distance.
    sigma : float
        Width of the Gaussian probability paths.
    hidden_layers, width : int
    n_steps : int
        RK4 steps used by :meth:`transform` and :meth:`inverse_transform`.
    epochs, batch_size, lr, lr_milestones, lr_gamma, betas, adam_eps, random_state
        See :class:`~learnquad.flows.AffineCouplingFlow`.

    Attributes
    ----------
    net_ : Mlp
        Velocity network on ``(x, t)``; its output layer starts at zero.
    loss_curve_ : ndarray
    """

    _config_fields = (
        "hidden_layers", "width", "n_steps", "epochs", "batch_size",
        "lr", "lr_milestones", "lr_gamma", "betas", "adam_eps",
    )

    def __init__(
        self,
        coupling="independent",
        sigma=0.01,
        hidden_layers=6,
        width=50,
        n_steps=100,
        epochs=100,
        batch_size=50,
        lr=1e-3,
        lr_milestones=(),
        lr_gamma=0.1,
        betas=(0.9, 0.999),
        adam_eps=1e-8,
        random_state=0,
    ):
        self.coupling = coupling
        self.sigma = sigma
        self.hidden_layers = hidden_layers
        self.width = width
        self.n_steps = n_steps
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr = lr
        self.lr_milestones = lr_milestones
        self.lr_gamma = lr_gamma
        self.betas = betas
        self.adam_eps = adam_eps
        self.random_state = random_state

    @classmethod
    def from_config(cls, config, **overrides):
        overrides.setdefault("coupling", "ot" if config.ot_enabled else "independent")
        overrides.setdefault("sigma", config.cfm_sigma)
        return super().from_config(config, **overrides)

    def _build(self, dim, generator):
        if self.coupling not in COUPLINGS:
            raise InvalidArgumentError(f"coupling must be one of {COUPLINGS}, got {self.coupling!r}")
        if not self.sigma >= 0:
            raise InvalidArgumentError("sigma must be nonnegative")
        self.net_ = Mlp(dim + 1, dim, self.hidden_layers, self.width, zero_output=True, generator=generator)

    def _modules_(self):
        return self.net_

    def _prepare(self, data, generator):
        pass

    def _loss(self, batch, generator):
        n, dim = batch.shape
        x0 = torch.randn((n, dim), generator=generator, dtype=batch.dtype)
        if self.coupling == "ot":
            batch = batch[torch.from_numpy(ot_assignment(x0.numpy(), batch.numpy()))]
        t = torch.rand((n, 1), generator=generator, dtype=batch.dtype)
        eps = torch.randn((n, dim), generator=generator, dtype=batch.dtype)
        return conditional_flow_loss(self.net_, x0, batch, t, eps, self.sigma)

    def velocity(self, X, t):
        """Evaluate the learned field ``v(x, t)`` at the rows of ``X``."""
        check_is_fitted(self, "net_")
        x = self._to_torch(X)
        tt = torch.full((len(x), 1), float(t), dtype=x.dtype)
        with torch.no_grad():
            return self.net_(torch.cat([x, tt], dim=1)).numpy()

    def inverse_transform(self, X):
        """Generative map: integrate ``dx/dt = v(x, t)`` from ``t = 0`` to ``1``."""
        check_is_fitted(self, "net_")
        return rk4_integrate(self.velocity, check_latent(self, X), self.n_steps, 0.0, 1.0)

    def transform(self, X):
        """Normalizing map: integrate the same field backward from ``t = 1`` to ``0``."""
        check_is_fitted(self, "net_")
        return rk4_integrate(self.velocity, check_latent(self, X), self.n_steps, 1.0, 0.0)


def train_cfm(data, config, log_path=None):
    """Fit a :class:`FlowMatching` model with independent pairing."""
    return FlowMatching.from_config(config, coupling="independent").fit(data, log_path=log_path)


def train_otcfm(data, config, log_path=None):
    """Fit a :class:`FlowMatching` model with minibatch optimal-transport pairing."""
    return FlowMatching.from_config(config, coupling="ot").fit(data, log_path=log_path)
