"""Closed-form ground truth for the Gaussian warm-up model ``Y = f0(X) * eps``.

With ``eps ~ N(0, I)`` and representation ``z = f0(x)``, the interpolated
state ``Y_t = alpha eta + beta Y`` is ``N(0, D I)`` given ``z`` with
``D = alpha^2 + beta^2 z^2``, and the conditional velocity is ``c(z, t) y``
where

    c(z, t) = (dalpha alpha + dbeta beta z^2) / D.

Everything below is checkable without training: the gradient identities of
the proxy velocity in ``y``, ``t`` and ``z``, the transport equation for the
Gaussian density path, and the terminal flow map ``y0 -> z y0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError, DenominatorError
from .interpolant import STRAIGHT, Schedule
from .sampler import euler_integrate, make_grid
from . import seeding


@dataclass(frozen=True)
class WarmUpSpec:
    f0: Callable
    d_y: int
    c1: float
    c2: float
    sched: Schedule = STRAIGHT

    def __post_init__(self):
        if self.d_y < 1:
            raise ConfigError("d_y must be positive")
        if not 0.0 < self.c1 <= self.c2:
            raise ConfigError("the range of f0 must satisfy 0 < c1 <= c2")

    def representation(self, X) -> np.ndarray:
        z = np.asarray(self.f0(np.atleast_2d(X)), dtype=np.float64).ravel()
        if np.any(z < self.c1) or np.any(z > self.c2):
            raise ConfigError(f"f0 left its declared range [{self.c1}, {self.c2}]")
        return z


@dataclass(frozen=True)
class GaussianConditional:
    """Law of ``Y`` given ``Y_t = y`` and ``z``: ``N(mean_coef * y, cov * I)``."""

    mean_coef: float
    cov: float

    def mean(self, y) -> np.ndarray:
        return self.mean_coef * np.asarray(y, dtype=np.float64)

    def cov_sq_norm(self, y) -> np.ndarray:
        # Cov(|Y|^2, Y) = 2 cov * mean for an isotropic Gaussian
        return 2.0 * self.cov * self.mean(y)


def _coeffs(t, sched):
    a, b, da, db = sched.coefficients(np.float64(t))
    return float(a), float(b), float(da), float(db)


def _denominator(z, t, sched) -> float:
    a, b, _, _ = _coeffs(t, sched)
    den = a * a + b * b * z * z
    if not den > 0.0:
        raise DenominatorError(f"alpha^2 + beta^2 z^2 = {den} at z={z}, t={t}")
    return den


def velocity_coefficient(z: float, t: float, sched: Schedule = STRAIGHT) -> float:
    a, b, da, db = _coeffs(t, sched)
    return (da * a + db * b * z * z) / _denominator(z, t, sched)


def closed_form_g0(z: float, y, t: float, sched: Schedule = STRAIGHT) -> np.ndarray:
    return velocity_coefficient(z, t, sched) * np.asarray(y, dtype=np.float64)


def conditional_moments(z: float, t: float, sched: Schedule = STRAIGHT) -> GaussianConditional:
    a, b, _, _ = _coeffs(t, sched)
    den = _denominator(z, t, sched)
    return GaussianConditional(b * z * z / den, z * z * a * a / den)


def joint_gaussian_posterior(z: float, y, t: float, sched: Schedule = STRAIGHT):
    """``E[eta | Y_t = y]``, ``E[Y | Y_t = y]`` and ``Cov[Y | Y_t = y]`` by
    conditioning the joint covariance of ``(eta, Y, Y_t)`` numerically."""
    y = np.asarray(y, dtype=np.float64)
    k = y.size
    a, b, _, _ = _coeffs(t, sched)
    I = np.eye(k)
    O = np.zeros((k, k))
    # (eta, Y, Y_t) = A @ (eta, eps)
    A = np.block([[I, O], [O, z * I], [a * I, b * z * I]])
    S = A @ A.T
    S_xt = S[: 2 * k, 2 * k :]
    S_tt = S[2 * k :, 2 * k :]
    if abs(np.linalg.det(S_tt)) == 0.0:
        raise DenominatorError(f"state covariance is singular at z={z}, t={t}")
    W = np.linalg.solve(S_tt, np.column_stack([y, S_xt.T]))
    post_mean = S_xt @ W[:, 0]
    post_cov = S[: 2 * k, : 2 * k] - S_xt @ W[:, 1:]
    return post_mean[:k], post_mean[k:], post_cov[k:, k:]


def gaussian_conditional_velocity(z: float, y, t: float, sched: Schedule = STRAIGHT) -> np.ndarray:
    _, _, da, db = _coeffs(t, sched)
    e_eta, e_y, _ = joint_gaussian_posterior(z, y, t, sched)
    return da * e_eta + db * e_y


def _interior(t, margin=0.0):
    if not margin < t < 1.0 - margin:
        raise ConfigError(f"t={t} must lie strictly inside ({margin}, {1 - margin})")


def covariance_gradient_y(z: float, t: float, sched: Schedule = STRAIGHT) -> float:
    """Scalar multiple of the identity given by the covariance formula for
    the y-Jacobian of the proxy velocity."""
    a, b, da, db = _coeffs(t, sched)
    w = a * db - da * b
    return b / a**3 * w * conditional_moments(z, t, sched).cov + da / a


def check_covariance_identity(z: float, t: float, sched: Schedule = STRAIGHT) -> float:
    _interior(t)
    return abs(covariance_gradient_y(z, t, sched) - velocity_coefficient(z, t, sched))


def velocity_time_derivative(z: float, y, t: float, sched: Schedule = STRAIGHT) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    a, b, da, db = _coeffs(t, sched)
    dda, ddb = (float(v) for v in sched.second_derivatives(np.float64(t)))
    w = a * db - da * b
    mom = conditional_moments(z, t, sched)
    return (
        ((a * ddb - dda * b) / a - da / a**2 * w) * mom.mean(y)
        + (dda / a - da**2 / a**2) * y
        - b / a**4 * w**2 * mom.cov_sq_norm(y)
        + w * (a * db - 2.0 * da * b) / a**4 * mom.cov * y
    )


def potential_grad_z(xi, z: float) -> float:
    """``d/dz`` of ``|xi|^2 / (2 z^2) + d_y log(z sqrt(2 pi))``."""
    xi = np.asarray(xi, dtype=np.float64)
    return float(-np.sum(xi * xi) / z**3 + xi.size / z)


def velocity_gradient_z(z: float, y, t: float, sched: Schedule = STRAIGHT) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    a, b, da, db = _coeffs(t, sched)
    w = a * db - da * b
    # Cov(Y, -|Y|^2 / z^3 + d_y / z); the constant term drops out
    cov_y_grad_u = -conditional_moments(z, t, sched).cov_sq_norm(y) / z**3
    return -w / a * cov_y_grad_u


def _relative(fd, analytic) -> float:
    fd, analytic = np.atleast_1d(fd), np.atleast_1d(analytic)
    return float(np.max(np.abs(fd - analytic)) / max(np.max(np.abs(analytic)), 1.0))


def _check_step(h):
    if not h > 0.0 or h < 1e-12:
        raise ConfigError(f"finite-difference step {h} underflows")


def check_time_derivative(z: float, y, t: float, sched: Schedule = STRAIGHT, h: float = 1e-5) -> float:
    _check_step(h)
    _interior(t, h)
    fd = (closed_form_g0(z, y, t + h, sched) - closed_form_g0(z, y, t - h, sched)) / (2 * h)
    return _relative(fd, velocity_time_derivative(z, y, t, sched))


def check_scale_derivative(z: float, y, t: float, sched: Schedule = STRAIGHT, h: float = 1e-5) -> float:
    _check_step(h)
    _interior(t, h)
    if not z - h > 0.0:
        raise ConfigError("z must exceed the finite-difference step")
    fd = (closed_form_g0(z + h, y, t, sched) - closed_form_g0(z - h, y, t, sched)) / (2 * h)
    return _relative(fd, velocity_gradient_z(z, y, t, sched))


def state_density(y, t: float, z: float, sched: Schedule = STRAIGHT) -> float:
    """Density of ``Y_t`` given ``z``: ``N(0, D I)``."""
    y = np.asarray(y, dtype=np.float64)
    den = _denominator(z, t, sched)
    return float((2 * math.pi * den) ** (-y.size / 2) * math.exp(-float(y @ y) / (2 * den)))


def transport_residual(z: float, y, t: float, sched: Schedule = STRAIGHT, h: float = 1e-5) -> float:
    """``|d_t rho + div_y(b rho)|`` by central differences, divided by the
    largest of ``|d_t rho|``, ``|div_y(b rho)|`` and ``rho`` itself."""
    _check_step(h)
    _interior(t, h)
    y = np.asarray(y, dtype=np.float64)
    dt = (state_density(y, t + h, z, sched) - state_density(y, t - h, z, sched)) / (2 * h)
    div = 0.0
    for j in range(y.size):
        e = np.zeros_like(y)
        e[j] = h
        flux_p = closed_form_g0(z, y + e, t, sched)[j] * state_density(y + e, t, z, sched)
        flux_m = closed_form_g0(z, y - e, t, sched)[j] * state_density(y - e, t, z, sched)
        div += (flux_p - flux_m) / (2 * h)
    scale = max(abs(dt), abs(div), state_density(y, t, z, sched))
    return abs(dt + div) / scale


@dataclass(frozen=True)
class CoefficientSuprema:
    sup_c: float
    sup_dt: float
    sup_dz: float

    @property
    def value(self) -> float:
        return max(self.sup_c, self.sup_dt, self.sup_dz)


def coefficient_suprema(c1: float, c2: float, sched: Schedule = STRAIGHT, n_t: int = 2001,
                        n_z: int = 201) -> CoefficientSuprema:
    """Suprema of ``|c|``, ``|d_t c|`` and ``|d_z c|`` over ``t in [0, 1]`` and
    ``z in [c1, c2]``, on a grid that contains the corners."""
    if not c1 > 0.0:
        raise ConfigError("c1 must be positive")
    if c2 < c1:
        raise ConfigError("c2 must be at least c1")
    t = np.linspace(0.0, 1.0, n_t)[:, None]
    z = np.array([c1]) if c1 == c2 else np.linspace(c1, c2, n_z)
    z = z[None, :]
    a, b, da, db = sched.coefficients(t)
    dda, ddb = sched.second_derivatives(t)
    num = da * a + db * b * z**2
    den = a * a + b * b * z**2
    if np.any(den <= 0.0):
        raise DenominatorError("alpha^2 + beta^2 z^2 vanishes on the grid")
    num_t = dda * a + da * da + (ddb * b + db * db) * z**2
    den_t = 2 * a * da + 2 * b * db * z**2
    c = num / den
    c_t = (num_t * den - num * den_t) / den**2
    c_z = (2 * db * b * z * den - num * 2 * b * b * z) / den**2
    sups = [float(np.max(np.abs(v))) for v in (c, c_t, c_z)]
    if not all(math.isfinite(s) for s in sups):
        raise ArithmeticError("coefficient supremum is not finite")
    return CoefficientSuprema(*sups)


def coefficient_bound(c1: float, c2: float, sched: Schedule = STRAIGHT) -> float:
    return coefficient_suprema(c1, c2, sched).value


def exact_flow_scale(z: float, sched: Schedule = STRAIGHT) -> float:
    """The flow of ``dy/dt = c(z, t) y`` over [0, 1] multiplies by
    ``exp(int c dt) = sqrt(D(1) / D(0))``, which is ``z`` for any schedule
    with ``alpha_0 = beta_1 = 1`` and ``alpha_1 = beta_0 = 0``."""
    return math.sqrt(_denominator(z, 1.0, sched) / _denominator(z, 0.0, sched))


def oracle_field(z: float, sched: Schedule = STRAIGHT):
    """``(state, t) -> c(z, t) * state`` for the sampler."""

    def field(y, t):
        return velocity_coefficient(z, t, sched) * y

    return field


def warmup_sample(z: float, d_y: int, n: int, rng) -> np.ndarray:
    """``n`` rows from ``N(0, z^2 I_{d_y})``."""
    if d_y < 1 or n < 0:
        raise ConfigError("d_y must be positive and n non-negative")
    return z * seeding.standard_normal(rng, (n, d_y))


# ---------------------------------------------------------------------------
# verification suite


Z_GRID = (0.5, 1.0, 2.0, 5.0)
T_GRID = tuple(round(0.05 * k, 10) for k in range(1, 20))
TRANSPORT_Z = (0.5, 1.0, 2.0)
TRANSPORT_T = tuple(round(0.1 * k, 10) for k in range(1, 10))


@dataclass
class CheckResult:
    name: str
    max_residual: float
    threshold: float
    error: Optional[str] = None

    @property
    def passed(self) -> bool:
        return self.error is None and self.max_residual < self.threshold


def _axes(d_y):
    return [np.eye(d_y)[j] for j in range(d_y)]


def _sweep(name, threshold, fn, points) -> CheckResult:
    worst = 0.0
    try:
        for p in points:
            r = float(fn(*p))
            if not math.isfinite(r):
                return CheckResult(name, math.inf, threshold, f"non-finite residual at {p}")
            worst = max(worst, r)
    except (ArithmeticError, ConfigError) as exc:
        return CheckResult(name, math.inf, threshold, f"{type(exc).__name__}: {exc}")
    return CheckResult(name, worst, threshold)


def run_checks(sched: Schedule = STRAIGHT, d_y: int = 2, h: float = 1e-5, flow_K: int = 1000) -> list[CheckResult]:
    """Every closed-form check on the standard grids, one result per check."""
    axes = _axes(d_y)
    grid = [(z, y, t) for z in Z_GRID for t in T_GRID for y in axes]

    def equivalence(z, y, t):
        return np.max(np.abs(closed_form_g0(z, y, t, sched) - gaussian_conditional_velocity(z, y, t, sched)))

    def moments(z, y, t):
        mom = conditional_moments(z, t, sched)
        _, e_y, cov = joint_gaussian_posterior(z, y, t, sched)
        return max(np.max(np.abs(e_y - mom.mean(y))), np.max(np.abs(cov - mom.cov * np.eye(d_y))))

    ones = np.ones(d_y)
    transport_pts = [(z, y, t) for z in TRANSPORT_Z for t in TRANSPORT_T for y in (0 * ones, ones)]

    def flow(z):
        y0 = np.ones(d_y)
        out = euler_integrate(oracle_field(z, sched), y0, make_grid(flow_K, 0.0))
        return np.max(np.abs(out / (exact_flow_scale(z, sched) * y0) - 1.0))

    def bound(c1, c2):
        return 0.0 if math.isfinite(coefficient_bound(c1, c2, sched)) else math.inf

    return [
        _sweep("velocity closed form vs joint-Gaussian conditioning", 1e-10, equivalence, grid),
        _sweep("conditional moments vs joint-Gaussian conditioning", 1e-10, moments, grid),
        _sweep("y-gradient covariance identity", 1e-10, lambda z, y, t: check_covariance_identity(z, t, sched), grid),
        _sweep("t-derivative identity (central FD)", 1e-6, lambda z, y, t: check_time_derivative(z, y, t, sched, h), grid),
        _sweep("z-gradient identity (central FD)", 1e-6, lambda z, y, t: check_scale_derivative(z, y, t, sched, h), grid),
        _sweep("transport equation (central FD)", 1e-6, lambda z, y, t: transport_residual(z, y, t, sched, h),
               transport_pts),
        _sweep("coefficient suprema finite", 0.5, bound, [(0.5, 2.0), (1.0, 1.0), (0.5, 5.0)]),
        _sweep(f"Euler flow map y0 -> z y0 at K={flow_K} (relative)", 1e-2, flow, [(z,) for z in Z_GRID]),
    ]
