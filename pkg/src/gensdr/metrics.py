"""Distance correlation, Wasserstein-2 distances and replication summaries."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import ConfigError, ShapeError
from . import seeding


def _as_2d(a):
    a = np.asarray(a, dtype=np.float64)
    return a[:, None] if a.ndim == 1 else a


def _pairwise(a):
    sq = np.sum(a * a, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (a @ a.T)
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, 0.0)
    return np.sqrt(d2)


def _pairwise_exact(a):
    # Direct differences; the Gram-matrix route above loses digits when
    # points are far from the origin relative to their spread.
    diff = a[:, None, :] - a[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=2))


def double_centered(dist: np.ndarray) -> np.ndarray:
    return dist - dist.mean(axis=0)[None, :] - dist.mean(axis=1)[:, None] + dist.mean()


def distance_correlation(A, B, exact: bool = True) -> float:
    """Squared-root V-statistic distance correlation of Szekely, Rizzo & Bakirov.

    Returns 0 when either sample has zero distance variance.
    """
    A, B = _as_2d(A), _as_2d(B)
    if A.shape[0] != B.shape[0]:
        raise ShapeError(f"row counts differ: {A.shape[0]} vs {B.shape[0]}")
    if A.shape[0] < 2:
        raise ConfigError("distance correlation needs at least two rows")
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B))):
        raise ConfigError("inputs contain non-finite values")
    dist = _pairwise_exact if exact else _pairwise
    a = double_centered(dist(A))
    b = double_centered(dist(B))
    dcov2 = np.mean(a * b)
    va, vb = np.mean(a * a), np.mean(b * b)
    if va <= 0.0 or vb <= 0.0:
        return 0.0
    r2 = max(dcov2, 0.0) / math.sqrt(va * vb)
    return float(min(math.sqrt(r2), 1.0))


def w2_1d(a, b) -> float:
    """Exact W2 between two equal-size 1-D empirical laws (sorted coupling)."""
    a = np.sort(np.asarray(a, dtype=np.float64).ravel())
    b = np.sort(np.asarray(b, dtype=np.float64).ravel())
    if a.size == 0 or b.size == 0:
        raise ConfigError("empty sample")
    if a.size != b.size:
        raise ShapeError("w2_1d requires equal sample sizes")
    return float(np.sqrt(np.mean((a - b) ** 2)))


def random_directions(d: int, n_proj: int, rng) -> np.ndarray:
    u = seeding.standard_normal(rng, (n_proj, d))
    return u / np.linalg.norm(u, axis=1, keepdims=True)


def sliced_w2(A, B, n_proj: int = 128, rng=None) -> float:
    """Root-mean-square of 1-D W2 over random unit projections."""
    A, B = _as_2d(A), _as_2d(B)
    if A.shape[1] != B.shape[1]:
        raise ShapeError("column counts differ")
    if A.shape[1] == 0:
        raise ConfigError("zero columns")
    rng = rng if rng is not None else seeding.make_rng(0)
    U = random_directions(A.shape[1], n_proj, rng)
    pa = np.sort(A @ U.T, axis=0)
    pb = np.sort(B @ U.T, axis=0)
    if pa.shape[0] != pb.shape[0]:
        raise ShapeError("sliced_w2 requires equal sample sizes")
    return float(np.sqrt(np.mean((pa - pb) ** 2)))


@dataclass
class RepRecord:
    setting: str
    param_key: str
    param_value: str
    rep: int
    seed: int
    dcor: float
    wall_ms: float = 0.0


REPORT_COLUMNS = ("setting", "param_key", "param_value", "rep", "seed", "dcor", "wall_ms")


@dataclass
class MetricsReport:
    records: list[RepRecord]
    mean: float
    std: float
    n_reps: int = field(init=False)

    def __post_init__(self):
        self.n_reps = len(self.records)

    def summary(self) -> dict:
        return {"mean": self.mean, "std": self.std, "n_reps": self.n_reps}


def _mean_std(values) -> tuple[float, float]:
    values = [float(v) for v in values]
    n = len(values)
    if n == 0:
        raise ConfigError("no records to aggregate")
    mean = math.fsum(values) / n
    if n == 1:
        return mean, 0.0
    var = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(var)


def aggregate(records: Iterable[RepRecord]) -> MetricsReport:
    """Mean and sample standard deviation (n - 1) of dcor; order-independent."""
    records = sorted(records, key=lambda r: (r.setting, r.param_key, r.param_value, r.rep))
    mean, std = _mean_std(r.dcor for r in records)
    return MetricsReport(records, mean, std)
