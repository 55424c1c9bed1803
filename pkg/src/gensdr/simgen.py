"""Simulated data for the benchmark settings A-F and the Gaussian warm-up model.

Parameterization choices that the mechanisms leave open are fixed here and
recorded in each dataset's metadata:

* ``Ga(k, r)`` in settings A and C is shape ``k`` and *rate* ``r``.
* ``La(1, 2)`` is location 1, scale 2.
* ``N(-1, 1)`` is mean -1, variance 1.

All samplers draw from the uniform stream of the supplied generator (normals
via Box-Muller), so a seed fixes the dataset bytes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigError
from . import seeding

TAGS = ("A", "B", "C", "D", "E", "F", "W")
TRUE_DIM = {"A": 1, "B": 2, "C": 3, "D": 2, "E": 1, "F": 1, "W": 1}
X_DISTS = ("uniform", "iso-gauss", "aniso-gauss")

# Defaults per setting: covariate law, its mean, response dimension.
_DEFAULTS = {
    "A": dict(x_dist="uniform", x_mean=1.0, d_y=2),
    "B": dict(x_dist="uniform", x_mean=0.0, d_y=2),
    "C": dict(x_dist="uniform", x_mean=0.0, d_y=5),
    "D": dict(x_dist="uniform", x_mean=0.0, d_y=2),
    "E": dict(x_dist="uniform", x_mean=0.0, d_y=None),
    "F": dict(x_dist="uniform", x_mean=0.0, d_y=None),
    "W": dict(x_dist="uniform", x_mean=0.0, d_y=2),
}

CONVENTIONS = {
    "gamma": "shape-rate: Ga(k, r) has mean k / r",
    "laplace": "La(mu, b): location mu, scale b",
    "normal": "N(mu, s2): mean mu, variance s2",
}


# ---------------------------------------------------------------------------
# elementary samplers


def _gamma_marsaglia_tsang(rng, shape: float, n: int) -> np.ndarray:
    """Unit-scale Gamma(shape) draws by the Marsaglia-Tsang squeeze method."""
    if shape < 1.0:
        g = _gamma_marsaglia_tsang(rng, shape + 1.0, n)
        u = seeding.uniform(rng, n)
        return g * (1.0 - u) ** (1.0 / shape)  # 1 - u avoids 0 ** (1/shape) at u = 0
    d = shape - 1.0 / 3.0
    c = 1.0 / np.sqrt(9.0 * d)
    out = np.empty(n)
    todo = np.arange(n)
    while todo.size:
        m = todo.size
        x = seeding.standard_normal(rng, m)
        u = seeding.uniform(rng, m)
        v = (1.0 + c * x) ** 3
        ok = v > 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            accept = ok & (np.log1p(-u) < 0.5 * x * x + d - d * v + d * np.log(np.where(ok, v, 1.0)))
        out[todo[accept]] = d * v[accept]
        todo = todo[~accept]
    return out


def sample_dist(kind: str, params: dict, n: int, rng: np.random.Generator) -> np.ndarray:
    """i.i.d. draws. Kinds and parameters:

    gamma(shape, scale | rate), student_t(df), bernoulli(p), chi2(k),
    laplace(loc, scale), normal(mean, var).
    """
    p = dict(params)
    if kind == "gamma":
        shape = float(p["shape"])
        if "rate" in p:
            scale = 1.0 / float(p["rate"])
        else:
            scale = float(p.get("scale", 1.0))
        if shape <= 0 or scale <= 0:
            raise ConfigError("gamma needs positive shape and scale")
        return scale * _gamma_marsaglia_tsang(rng, shape, n)
    if kind == "chi2":
        k = float(p["k"])
        if k <= 0:
            raise ConfigError("chi2 needs k > 0")
        return 2.0 * _gamma_marsaglia_tsang(rng, 0.5 * k, n)
    if kind == "student_t":
        df = float(p["df"])
        if df <= 0:
            raise ConfigError("student_t needs df > 0")
        z = seeding.standard_normal(rng, n)
        chi = 2.0 * _gamma_marsaglia_tsang(rng, 0.5 * df, n)
        return z / np.sqrt(chi / df)
    if kind == "bernoulli":
        prob = float(p["p"])
        if not 0.0 <= prob <= 1.0:
            raise ConfigError("bernoulli needs p in [0, 1]")
        return (seeding.uniform(rng, n) < prob).astype(np.float64)
    if kind == "laplace":
        loc, scale = float(p.get("loc", 0.0)), float(p.get("scale", 1.0))
        if scale <= 0:
            raise ConfigError("laplace needs scale > 0")
        u = seeding.uniform(rng, n) - 0.5
        return loc - scale * np.sign(u) * np.log1p(-2.0 * np.abs(u))
    if kind == "normal":
        mean, var = float(p.get("mean", 0.0)), float(p.get("var", 1.0))
        if var < 0:
            raise ConfigError("normal needs var >= 0")
        return mean + np.sqrt(var) * seeding.standard_normal(rng, n)
    raise ConfigError(f"unknown distribution {kind!r}")


def centering_matrix(d_x: int) -> np.ndarray:
    """``H = I - 1 1^T / (1 + d_x)``."""
    return np.eye(d_x) - np.ones((d_x, d_x)) / (1.0 + d_x)


def sample_x(dist: str, n: int, d_x: int, rng: np.random.Generator, mean: float = 0.0) -> np.ndarray:
    if d_x < 1:
        raise ConfigError("d_x must be at least 1")
    if dist == "uniform":
        return seeding.uniform(rng, (n, d_x))
    if dist == "iso-gauss":
        return mean + seeding.standard_normal(rng, (n, d_x))
    if dist == "aniso-gauss":
        xi = seeding.standard_normal(rng, (n, d_x))
        return mean + xi @ centering_matrix(d_x).T
    raise ConfigError(f"unknown covariate distribution {dist!r}")


# ---------------------------------------------------------------------------
# 2x2 SPD matrices


@dataclass(frozen=True)
class SpdMatrix2:
    """``[[a, b], [b, c]]`` with ``a > 0`` and ``ac - b^2 > 0``."""

    a: float
    b: float
    c: float

    def __post_init__(self):
        if not (self.a > 0 and self.a * self.c - self.b * self.b > 0):
            raise ConfigError("matrix is not positive definite")

    def as_array(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.b, self.c]])

    @classmethod
    def from_array(cls, m) -> "SpdMatrix2":
        m = np.asarray(m, dtype=np.float64)
        return cls(float(m[0, 0]), float(0.5 * (m[0, 1] + m[1, 0])), float(m[1, 1]))


def _as_sym(m):
    if isinstance(m, SpdMatrix2):
        return m.as_array()
    m = np.asarray(m, dtype=np.float64)
    if m.shape[-2:] != (2, 2):
        raise ConfigError(f"expected 2x2 matrices, got shape {m.shape}")
    return 0.5 * (m + np.swapaxes(m, -1, -2))


def _eig_map(s, fn):
    w, v = np.linalg.eigh(s)
    out = np.einsum("...ij,...j,...kj->...ik", v, fn(w), v)
    return 0.5 * (out + np.swapaxes(out, -1, -2))  # exact symmetry despite rounding


def spd_log(m) -> np.ndarray:
    """Matrix logarithm of one or a stack of SPD 2x2 matrices."""
    s = _as_sym(m)
    w = np.linalg.eigvalsh(s)
    if np.any(w <= 0):
        raise ConfigError("spd_log needs positive definite input")
    return _eig_map(s, np.log)


def spd_exp(s) -> np.ndarray:
    """Matrix exponential of one or a stack of symmetric 2x2 matrices."""
    return _eig_map(_as_sym(s), np.exp)


def sym_matrix_normal(r: int, rng: np.random.Generator, size: Optional[int] = None) -> np.ndarray:
    """Standard symmetric matrix-variate normal: N(0, 1) diagonal, N(0, 1/2) off-diagonal."""
    k = 1 if size is None else int(size)
    diag = seeding.standard_normal(rng, (k, r))
    iu = np.triu_indices(r, 1)
    off = np.sqrt(0.5) * seeding.standard_normal(rng, (k, len(iu[0])))
    z = np.zeros((k, r, r))
    z[:, np.arange(r), np.arange(r)] = diag
    z[:, iu[0], iu[1]] = off
    z[:, iu[1], iu[0]] = off
    return z[0] if size is None else z


def spd_to_triples(Ys) -> np.ndarray:
    Ys = np.asarray(Ys)
    return np.stack([Ys[:, 0, 0], Ys[:, 0, 1], Ys[:, 1, 1]], axis=1)


def triples_to_spd(T) -> np.ndarray:
    T = np.asarray(T, dtype=np.float64)
    out = np.empty((T.shape[0], 2, 2))
    out[:, 0, 0], out[:, 0, 1], out[:, 1, 0], out[:, 1, 1] = T[:, 0], T[:, 1], T[:, 1], T[:, 2]
    return out


# ---------------------------------------------------------------------------
# settings


@dataclass
class SimSetting:
    tag: str
    n: int = 1000
    d_x: int = 50
    x_dist: Optional[str] = None
    x_mean: Optional[float] = None
    gamma: float = 0.1  # noise level, setting B
    d_y: Optional[int] = None  # setting C response dimension, warm-up dimension

    def __post_init__(self):
        if self.tag not in TAGS:
            raise ConfigError(f"unknown setting {self.tag!r}; choose from {TAGS}")
        defaults = _DEFAULTS[self.tag]
        if self.x_dist is None:
            self.x_dist = defaults["x_dist"]
        if self.x_mean is None:
            self.x_mean = defaults["x_mean"]
        if self.d_y is None:
            self.d_y = defaults["d_y"]
        if self.x_dist not in X_DISTS:
            raise ConfigError(f"unknown covariate distribution {self.x_dist!r}")
        if self.n < 1:
            raise ConfigError("n must be positive")
        min_dx = {"A": 2, "B": 4, "C": 6, "D": 4, "E": 2, "F": 2, "W": 1}[self.tag]
        if self.d_x < min_dx:
            raise ConfigError(f"setting {self.tag} needs d_x >= {min_dx}")
        if self.tag == "C" and self.d_y < 2:
            raise ConfigError("setting C needs d_y >= 2")

    @property
    def d(self) -> int:
        return TRUE_DIM[self.tag]

    @property
    def spd(self) -> bool:
        return self.tag in ("E", "F")

    def to_dict(self) -> dict:
        return dict(tag=self.tag, n=self.n, d_x=self.d_x, x_dist=self.x_dist, x_mean=self.x_mean,
                    gamma=self.gamma, d_y=self.d_y)


@dataclass
class Dataset:
    X: np.ndarray
    Y: np.ndarray  # (n, d_y), or (n, 2, 2) SPD stack for settings E/F
    r_true: np.ndarray
    setting: SimSetting
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.X.shape[0]


def h_setting_a(X):
    return (1.0 + np.abs(X[:, 1])) ** -2 * np.exp(X[:, 0])


def h_setting_b(X):
    u = 1.0 + 3.0 * X[:, 1] - X[:, 2]
    if np.any(u < 0):
        raise ConfigError("setting B: negative base for the 4/3 power; covariates outside the intended support")
    first = X[:, 0] ** 2 * np.exp(2.0 * X[:, 3] ** 2)
    with np.errstate(invalid="ignore"):
        gate = np.sqrt(np.maximum(X[:, 0], 0.0)) > 0.8
    gate &= X[:, 0] >= 0
    second = u ** (4.0 / 3.0) * gate
    return np.stack([first, second], axis=1)


def h_setting_c(X, d_y):
    n = X.shape[0]
    mean = np.ones((n, d_y))
    mean[:, 0] = 4.0 * np.cos(np.pi * X[:, 2])
    scale = np.ones((n, d_y))
    scale[:, 0] = 5.0 * (X[:, :6].sum(axis=1) / 6.0) ** 3
    scale[:, 1] = np.log1p(3.0 * X[:, 1])
    return mean, scale


def h_setting_d(X):
    h3 = np.maximum(2.0 * X[:, 0] * X[:, 1] - 1.0, np.sin(np.pi * (X[:, 2] + X[:, 3])))
    h4 = np.minimum(X[:, 1], X[:, 2])
    return (h3 > 0).astype(np.float64), (h3 > h4).astype(np.float64)


def h_setting_e(X):
    s = X[:, 0] + X[:, 1]
    return np.tanh(0.5 * s)  # (e^s - 1) / (e^s + 1)


def h_setting_f(X):
    return X[:, 0] * X[:, 1]


def f0_warmup(X):
    """Scale function of the warm-up model ``Y = f0(X) eps``; range [1, e] on the unit cube."""
    return np.exp(X[:, 0])


def _responses(setting: SimSetting, X, rng):
    n = X.shape[0]
    tag = setting.tag
    if tag == "A":
        h0 = h_setting_a(X)
        w1 = sample_dist("gamma", {"shape": 3, "rate": 5}, n, rng)
        w2 = sample_dist("student_t", {"df": 3}, n, rng)
        w3 = sample_dist("student_t", {"df": 3}, n, rng)
        w4 = sample_dist("bernoulli", {"p": 0.5}, n, rng)
        W = np.stack([w1, w2 * w4 + (w3 + 10.0) * (1.0 - w4) - np.exp(w1)], axis=1)
        return h0[:, None] * W, h0[:, None]
    if tag == "B":
        h0 = h_setting_b(X)
        W = np.stack([sample_dist("chi2", {"k": 3}, n, rng), sample_dist("chi2", {"k": 5}, n, rng)], axis=1)
        return h0 + setting.gamma * W, h0
    if tag == "C":
        mean, scale = h_setting_c(X, setting.d_y)
        W = sample_dist("gamma", {"shape": 3, "rate": 1}, n * setting.d_y, rng).reshape(setting.d_y, n).T
        r_true = np.stack([mean[:, 0], scale[:, 0], scale[:, 1]], axis=1)
        return mean + scale * W, r_true
    if tag == "D":
        h0, h1 = h_setting_d(X)
        w1 = sample_dist("laplace", {"loc": 1, "scale": 2}, n, rng)
        w2 = sample_dist("normal", {"mean": -1, "var": 1}, n, rng)
        Y = np.stack([w1 * h0 + w2 * (1 - h0), w1 * h1 + w2 * (1 - h1)], axis=1)
        return Y, np.stack([h0, h1], axis=1)
    if tag == "E":
        h0 = h_setting_e(X)
        D = np.ones((n, 2, 2))
        D[:, 0, 1] = D[:, 1, 0] = h0
        Z = sym_matrix_normal(2, rng, size=n)
        return spd_exp(0.1 * Z + spd_log(D)), h0[:, None]
    if tag == "F":
        h0 = h_setting_f(X)
        log_d = spd_log(np.array([[1.0, -0.5], [-0.5, 1.0]]))
        Z = sym_matrix_normal(2, rng, size=n)
        return spd_exp(h0[:, None, None] * Z + log_d), h0[:, None]
    if tag == "W":
        f0 = f0_warmup(X)
        eps = seeding.standard_normal(rng, (n, setting.d_y))
        return f0[:, None] * eps, f0[:, None]
    raise ConfigError(tag)


def generate(setting: SimSetting, rng: np.random.Generator) -> Dataset:
    X = sample_x(setting.x_dist, setting.n, setting.d_x, rng, mean=setting.x_mean)
    Y, r_true = _responses(setting, X, rng)
    meta = {"setting": setting.to_dict(), "conventions": dict(CONVENTIONS), "d": setting.d}
    return Dataset(X, Y, r_true, setting, meta)
