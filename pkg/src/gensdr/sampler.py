"""Euler integration of the probability-flow ODE and conditional sampling."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConfigError, NonFiniteError
from .interpolant import check_tau
from . import seeding


@dataclass(frozen=True)
class OdeGrid:
    times: np.ndarray
    tau: float

    @property
    def K(self) -> int:
        return len(self.times) - 1

    @property
    def delta(self) -> float:
        return float(np.max(np.diff(self.times)))


def make_grid(K: int, tau: float = 0.0) -> OdeGrid:
    """Uniform grid on ``[0, 1 - tau]`` with ``K`` steps; both endpoints exact."""
    if int(K) < 1:
        raise ConfigError("the grid needs at least one step")
    tau = check_tau(tau)
    times = np.linspace(0.0, 1.0 - tau, int(K) + 1)
    times[0], times[-1] = 0.0, 1.0 - tau
    return OdeGrid(times, tau)


def euler_integrate(field: Callable, z0, grid: OdeGrid) -> np.ndarray:
    """Explicit Euler: ``z <- z + (t_{k+1} - t_k) field(z, t_k)``.

    ``z0`` may be a single state or a batch of states (rows). The terminal
    time itself is never passed to ``field``.
    """
    z = np.array(z0, dtype=np.float64)
    times = grid.times
    for k in range(grid.K):
        z = z + (times[k + 1] - times[k]) * field(z, times[k])
        if not np.all(np.isfinite(z)):
            raise NonFiniteError(f"non-finite state after Euler step {k}", where=k)
    return z


def generate(model, x, n_samples: int, grid: OdeGrid, rng) -> np.ndarray:
    """``n_samples`` draws approximating ``Y | X = x`` from a fitted model."""
    if abs(grid.tau - model.tau) > 1e-15 and grid.tau < model.tau:
        raise ConfigError(
            f"grid reaches t = {1 - grid.tau}, beyond the training range t <= {1 - model.tau}"
        )
    z = model.represent(np.asarray(x, dtype=np.float64).reshape(1, -1))
    Z = np.repeat(z, n_samples, axis=0)
    y0 = seeding.standard_normal(rng, (n_samples, model.d_y))

    def field(y, t):
        return model.velocity(Z, y, np.full(n_samples, t))

    return euler_integrate(field, y0, grid)
