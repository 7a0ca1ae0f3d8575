"""Fixed-step integration of the learned velocity fields."""

import numpy as np

from ..exceptions import GenerationDivergedError, InvalidArgumentError

__all__ = ["rk4_integrate"]


def rk4_integrate(velocity, x0, n_steps=100, t0=0.0, t1=1.0):
    """Integrate ``dx/dt = velocity(x, t)`` with the classical Runge-Kutta scheme.

    Parameters
    ----------
    velocity : callable
        ``velocity(x, t)`` with ``x`` of shape ``(n, M)`` and scalar ``t``.
    x0 : ndarray, shape (n, M)
    n_steps : int
    t0, t1 : float
        Integration runs from ``t0`` to ``t1`` (``t1 < t0`` integrates backward).

    Raises
    ------
    GenerationDivergedError
        If the state becomes non-finite.
    """
    if isinstance(n_steps, bool) or int(n_steps) != n_steps or n_steps < 1:
        raise InvalidArgumentError(f"n_steps must be a positive integer, got {n_steps!r}")
    x = np.array(x0, dtype=float)
    h = (t1 - t0) / n_steps
    for step in range(n_steps):
        t = t0 + step * h
        k1 = velocity(x, t)
        k2 = velocity(x + 0.5 * h * k1, t + 0.5 * h)
        k3 = velocity(x + 0.5 * h * k2, t + 0.5 * h)
        k4 = velocity(x + h * k3, t + h)
        x = x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(x)):
            raise GenerationDivergedError(f"non-finite state after step {step + 1} of {n_steps}")
    return x
