"""Sparse-grid quadrature pushed through learned transport maps.

Subpackages and modules
-----------------------
quadrature
    Gauss-Hermite rules and Smolyak sparse grids for the standard normal.
levy
    Lévy white noise on a periodic lattice, spectral smoothing and modal
    coefficients.
fem
    Lowest-order mixed finite elements for the flow-cell problem.
flows
    Transport models (affine coupling flows, conditional flow matching)
    with a scikit-learn style estimator API.
pipeline
    Experiment configuration, datasets, error studies and the ``learnquad``
    command-line tool.
"""

from . import fem, flows, levy, pipeline, quadrature
from .exceptions import (
    EllipticityError,
    InvalidArgumentError,
    NumericalError,
)
from .flows import LearnedQuadrature
from .quadrature import smolyak_rule

__version__ = "0.1.0"

__all__ = [
    "fem",
    "flows",
    "levy",
    "pipeline",
    "quadrature",
    "EllipticityError",
    "InvalidArgumentError",
    "NumericalError",
    "LearnedQuadrature",
    "smolyak_rule",
    "__version__",
]
