"""Smooth fully connected networks in double precision."""

import torch
from torch import nn

__all__ = ["Mlp", "DTYPE"]

DTYPE = torch.float64


class Mlp(nn.Module):
    """Feed-forward network with softplus between layers and a linear output.

    Parameters
    ----------
    n_in, n_out : int
        Input and output widths.
    hidden_layers : int
        Number of hidden layers, each of ``width`` neurons.
    zero_output : bool
        Zero the final layer so the untrained network outputs 0.
    generator : torch.Generator, optional
        Source of the initial weights.
    """

    def __init__(self, n_in, n_out, hidden_layers=3, width=64, zero_output=False, generator=None):
        super().__init__()
        widths = [n_in] + [width] * hidden_layers + [n_out]
        self.layers = nn.ModuleList(
            nn.Linear(a, b, dtype=DTYPE) for a, b in zip(widths[:-1], widths[1:])
        )
        self.activation = nn.Softplus()
        with torch.no_grad():
            for layer in self.layers:
                bound = 1.0 / layer.in_features**0.5
                layer.weight.uniform_(-bound, bound, generator=generator)
                layer.bias.uniform_(-bound, bound, generator=generator)
            if zero_output:
                self.layers[-1].weight.zero_()
                self.layers[-1].bias.zero_()

    @property
    def widths(self):
        return [self.layers[0].in_features] + [layer.out_features for layer in self.layers]

    def forward(self, x):
        for layer in self.layers[:-1]:
            x = self.activation(layer(x))
        return self.layers[-1](x)
