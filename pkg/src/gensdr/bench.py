"""Fitting glue shared by the CLI and the replication runner.

Every replication draws from streams keyed by ``(base_seed, rep, stage)``, so
a replication's result does not depend on which worker ran it or when.
"""

from __future__ import annotations

import multiprocessing
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .errors import ConfigError
from .metrics import RepRecord, distance_correlation, sliced_w2
from .oracle import warmup_sample
from .sampler import generate as sample_model, make_grid
from .simgen import Dataset, SimSetting, f0_warmup, generate, sample_x, spd_to_triples, triples_to_spd
from .trainer import TrainConfig, build_kernel_ensemble, train, train_ensemble
from . import seeding

ENSEMBLE_MODES = ("exact", "shared")
_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


@dataclass
class EnsembleConfig:
    mode: str = "exact"
    m: int = 8
    fraction: float = 0.5
    heads_per_batch: int = 16
    embed_dim: int = 8

    def __post_init__(self):
        if self.mode not in ENSEMBLE_MODES:
            raise ConfigError(f"ensemble mode must be one of {ENSEMBLE_MODES}")
        if self.m < 1 or self.heads_per_batch < 1 or self.embed_dim < 1:
            raise ConfigError("ensemble counts must be positive")
        if not 0.0 < self.fraction <= 1.0:
            raise ConfigError("reference fraction must lie in (0, 1]")

    def to_dict(self) -> dict:
        return asdict(self)


def fit(X, Y, spd: bool, d: int, train_cfg: TrainConfig, ens_cfg: EnsembleConfig, ens_rng):
    """Train the vector-response model, or the kernel ensemble for SPD responses."""
    if spd:
        spec = build_kernel_ensemble(Y, ens_cfg.fraction, ens_rng, ens_cfg.m)
        return train_ensemble(X, Y, spec, train_cfg, d=d, mode=ens_cfg.mode,
                              heads_per_batch=ens_cfg.heads_per_batch, embed_dim=ens_cfg.embed_dim)
    return train(X, Y, train_cfg, d=d)


@dataclass
class BenchJob:
    setting: dict
    train: dict
    ensemble: dict
    d: int
    base_seed: int
    rep: int
    n_test: int
    param_key: str


def rep_seed(base_seed: int, rep: int, stage: str) -> int:
    return seeding.hash64(base_seed, rep, stage)


def run_replication(job: BenchJob) -> RepRecord:
    start = time.perf_counter()
    setting = SimSetting(**job.setting)
    test_setting = SimSetting(**{**job.setting, "n": job.n_test})
    data = generate(setting, seeding.make_rng(rep_seed(job.base_seed, job.rep, "data-train")))
    test = generate(test_setting, seeding.make_rng(rep_seed(job.base_seed, job.rep, "data-test")))
    train_cfg = TrainConfig(**{**job.train, "seed": rep_seed(job.base_seed, job.rep, "fit")})
    ens_rng = seeding.make_rng(rep_seed(job.base_seed, job.rep, "ensemble"))
    model, _ = fit(data.X, data.Y, setting.spd, job.d, train_cfg, EnsembleConfig(**job.ensemble), ens_rng)
    dcor = distance_correlation(model.represent(test.X), test.r_true)
    wall_ms = (time.perf_counter() - start) * 1e3
    return RepRecord(setting.tag, job.param_key, str(job.setting.get(job.param_key, "")), job.rep,
                     rep_seed(job.base_seed, job.rep, "fit"), dcor, round(wall_ms, 3))


def default_param_key(tag: str) -> str:
    return {"B": "gamma", "C": "d_y"}.get(tag, "x_dist")


def run_bench(setting: SimSetting, train_cfg: TrainConfig, ens_cfg: EnsembleConfig, d: Optional[int],
              base_seed: int, n_reps: int, n_test: int = 1000, jobs: int = 1,
              param_key: Optional[str] = None) -> list[RepRecord]:
    """Replications ``1..n_reps`` in a pool of ``jobs`` spawned single-threaded
    workers; records come back ordered by replication index."""
    if n_reps < 1 or jobs < 1 or n_test < 2:
        raise ConfigError("n_reps and jobs must be positive and n_test at least 2")
    settings = setting.to_dict()
    key = param_key or default_param_key(setting.tag)
    if key not in settings:
        raise ConfigError(f"param_key {key!r} is not a setting field")
    train = train_cfg.to_dict()
    train.pop("seed")
    jobs_list = [
        BenchJob(settings, train, ens_cfg.to_dict(), d or setting.d, base_seed, rep, n_test, key)
        for rep in range(1, n_reps + 1)
    ]
    saved = {v: os.environ.get(v) for v in _THREAD_VARS}
    os.environ.update({v: "1" for v in _THREAD_VARS})
    try:
        ctx = multiprocessing.get_context("spawn")
        with ProcessPoolExecutor(max_workers=min(jobs, n_reps), mp_context=ctx) as pool:
            records = list(pool.map(run_replication, jobs_list))
    finally:
        for v, old in saved.items():
            if old is None:
                os.environ.pop(v, None)
            else:
                os.environ[v] = old
    return sorted(records, key=lambda r: r.rep)


def dataset_table(data: Dataset) -> tuple[list[str], np.ndarray]:
    """Column names and values for the dataset CSV: X, then Y (or the SPD
    triples a, b, c), then the true representation."""
    n, d_x = data.X.shape
    cols = [f"x{j + 1}" for j in range(d_x)]
    if data.setting.spd:
        Y = spd_to_triples(data.Y)
        cols += ["a", "b", "c"]
    else:
        Y = data.Y
        cols += [f"y{j + 1}" for j in range(Y.shape[1])]
    cols += [f"r{j + 1}" for j in range(data.r_true.shape[1])]
    return cols, np.hstack([data.X, Y, data.r_true])


def split_table(cols: list[str], values: np.ndarray):
    """Inverse of :func:`dataset_table`: ``(X, Y, r_true, spd)``; ``r_true`` may be None."""
    xs = [i for i, c in enumerate(cols) if c.startswith("x")]
    ys = [i for i, c in enumerate(cols) if c.startswith("y")]
    rs = [i for i, c in enumerate(cols) if c.startswith("r")]
    spd = all(c in cols for c in ("a", "b", "c"))
    if not xs or (not ys and not spd):
        raise ConfigError("dataset CSV needs x* columns and y* (or a, b, c) columns")
    X = values[:, xs]
    if spd:
        Y = triples_to_spd(values[:, [cols.index(c) for c in ("a", "b", "c")]])
    else:
        Y = values[:, ys]
    return X, Y, (values[:, rs] if rs else None), spd


@dataclass
class ConsistencyPoint:
    n: int
    sliced_w2: float
    wall_s: float


def consistency_curve(ns=(500, 1000, 2000), seed: int = 0, d_x: int = 50, n_test_x: int = 50,
                      n_samples: int = 2000, K: int = 100, n_directions: int = 128,
                      train_cfg: Optional[TrainConfig] = None) -> tuple[list[ConsistencyPoint], float]:
    """Sliced W2 between model and exact conditional samples of the warm-up
    model, averaged over fixed test covariates, for each training size.

    Returns the curve and ``mean f0`` over the test covariates.
    """
    cfg = train_cfg or TrainConfig()
    x_test = sample_x("uniform", n_test_x, d_x, seeding.derive_rng(seed, "consistency", "x-test"))
    f0 = f0_warmup(x_test)
    grid = make_grid(K, cfg.tau)
    curve = []
    for n in ns:
        start = time.perf_counter()
        data = generate(SimSetting("W", n=n, d_x=d_x), seeding.derive_rng(seed, "consistency", "data", n))
        model, _ = train(data.X, data.Y, TrainConfig(**{**cfg.to_dict(), "seed": seeding.hash64(seed, "fit", n)}),
                         d=1)
        dists = []
        for i, x in enumerate(x_test):
            gen = sample_model(model, x, n_samples, grid, seeding.derive_rng(seed, "consistency", "sample", n, i))
            ref = warmup_sample(float(f0[i]), data.Y.shape[1], n_samples,
                                seeding.derive_rng(seed, "consistency", "oracle", n, i))
            dists.append(sliced_w2(gen, ref, n_directions, seeding.derive_rng(seed, "consistency", "proj", n, i)))
        curve.append(ConsistencyPoint(int(n), float(np.mean(dists)), time.perf_counter() - start))
    return curve, float(np.mean(f0))


def inversions(values) -> int:
    """Number of adjacent increases in a sequence meant to decrease."""
    return int(sum(b > a for a, b in zip(values, values[1:])))
