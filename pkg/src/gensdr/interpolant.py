"""Interpolation schedules and training batches for conditional stochastic interpolation.

A schedule gives the path ``Y_t = alpha_t * eta + beta_t * Y`` between
Gaussian noise ``eta`` (t = 0) and the response ``Y`` (t = 1). The regression
target for the velocity network is the time derivative of that path.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError, ShapeError
from . import seeding

_HALF_PI = 0.5 * np.pi
TAU_MAX = 0.5


@dataclass(frozen=True)
class Schedule:
    """``kind`` is ``"straight"`` (alpha = 1 - t, beta = t) or ``"trig"``
    (alpha = cos(pi t / 2), beta = sin(pi t / 2)).

    ``"custom"`` takes a callable returning ``(alpha, beta, dalpha, dbeta,
    ddalpha, ddbeta)``; it exists so verification code can be pointed at a
    deliberately broken schedule.
    """

    kind: str = "straight"
    custom: Optional[Callable] = None

    def __post_init__(self):
        if self.kind not in ("straight", "trig", "custom"):
            raise ConfigError(f"unknown schedule kind {self.kind!r}")
        if (self.kind == "custom") != (self.custom is not None):
            raise ConfigError("custom schedules need a coefficient callable (and only they do)")

    def _all(self, t):
        t = np.asarray(t, dtype=np.float64)
        if self.kind == "straight":
            one = np.ones_like(t)
            zero = np.zeros_like(t)
            return 1.0 - t, t.copy(), -one, one, zero, zero.copy()
        if self.kind == "trig":
            c, s = np.cos(_HALF_PI * t), np.sin(_HALF_PI * t)
            k = _HALF_PI
            return c, s, -k * s, k * c, -k * k * c, -k * k * s
        return tuple(np.broadcast_to(np.asarray(v, dtype=np.float64), t.shape).copy()
                     for v in self.custom(t))

    def coefficients(self, t):
        """``(alpha, beta, dalpha, dbeta)`` at ``t`` without range checks."""
        return self._all(t)[:4]

    def second_derivatives(self, t):
        return self._all(t)[4:]

    def to_dict(self) -> dict:
        if self.kind == "custom":
            raise ConfigError("custom schedules are not serializable")
        return {"kind": self.kind}

    @classmethod
    def from_dict(cls, d: dict) -> "Schedule":
        return cls(d["kind"])


STRAIGHT = Schedule("straight")
TRIG = Schedule("trig")


def _check_t(t):
    t = np.asarray(t, dtype=np.float64)
    if np.any(~np.isfinite(t)) or np.any(t < 0.0) or np.any(t > 1.0):
        raise ConfigError("t must lie in [0, 1]")
    return t


def check_tau(tau: float) -> float:
    tau = float(tau)
    if not 0.0 <= tau <= TAU_MAX:
        raise ConfigError(f"early-stopping tau must lie in [0, {TAU_MAX}], got {tau}")
    return tau


def schedule_eval(sched: Schedule, t):
    """``(alpha, beta, dalpha, dbeta)`` at ``t`` in [0, 1]."""
    return sched.coefficients(_check_t(t))


def _pair(y0, y1):
    y0 = np.asarray(y0, dtype=np.float64)
    y1 = np.asarray(y1, dtype=np.float64)
    if y0.shape != y1.shape:
        raise ShapeError(f"endpoint shapes differ: {y0.shape} vs {y1.shape}")
    return y0, y1


def interpolate(sched: Schedule, y0, y1, t) -> np.ndarray:
    y0, y1 = _pair(y0, y1)
    a, b, _, _ = schedule_eval(sched, t)
    return a * y0 + b * y1


def velocity_target(sched: Schedule, y0, y1, t) -> np.ndarray:
    y0, y1 = _pair(y0, y1)
    _, _, da, db = schedule_eval(sched, t)
    return da * y0 + db * y1


def schedule_psi(sched: Schedule, tau: float, n_grid: int = 10001) -> float:
    """Largest ``1 / alpha_t`` over ``t`` in ``[0, 1 - tau]``.

    Evaluated on a dense grid that includes both endpoints, which is exact for
    the monotone built-in schedules.
    """
    tau = float(tau)
    if not 0.0 < tau <= TAU_MAX:
        raise ConfigError(f"tau must lie in (0, {TAU_MAX}], got {tau}")
    t = np.linspace(0.0, 1.0 - tau, n_grid)
    alpha = sched.coefficients(t)[0]
    if np.any(alpha <= 0.0):
        raise ConfigError("alpha_t vanishes on [0, 1 - tau]; schedule invalid for this tau")
    return float(np.max(1.0 / alpha))


@dataclass
class CsiBatch:
    X: np.ndarray
    Y: np.ndarray
    eta: np.ndarray
    t: np.ndarray
    Y_t: np.ndarray
    target: np.ndarray
    tau: float

    @property
    def n(self) -> int:
        return self.X.shape[0]


def assemble_batch(X, Y, eta, t, sched: Schedule, tau: float) -> CsiBatch:
    """Fill in the interpolated states and targets from given draws."""
    a, b, da, db = sched.coefficients(t)
    a, b, da, db = a[:, None], b[:, None], da[:, None], db[:, None]
    return CsiBatch(X, Y, eta, t, a * eta + b * Y, da * eta + db * Y, tau)


def draw_noise_and_times(rng: np.random.Generator, n: int, d_y: int, tau: float):
    """``eta ~ N(0, I)`` rows and ``t ~ U[0, 1 - tau]``, in that order."""
    eta = seeding.standard_normal(rng, (n, d_y))
    t = (1.0 - tau) * seeding.uniform(rng, n)
    return eta, t


def make_batch(X, Y, sched: Schedule, tau: float, rng: np.random.Generator) -> CsiBatch:
    tau = check_tau(tau)
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim == 1:
        Y = Y[:, None]
    if X.shape[0] != Y.shape[0]:
        raise ShapeError(f"X has {X.shape[0]} rows, Y has {Y.shape[0]}")
    eta, t = draw_noise_and_times(rng, Y.shape[0], Y.shape[1], tau)
    return assemble_batch(X, Y, eta, t, sched, tau)
