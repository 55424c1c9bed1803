"""Seed derivation and the elementary random streams.

Every random draw in the package goes through a ``numpy.random.Generator``
backed by the counter-based Philox bit generator. Normals are produced here
by Box-Muller from the uniform stream rather than through numpy's ziggurat so
that a seed pins the exact bytes independent of numpy's distribution code.

Sub-streams for replications are keyed by ``hash64(base_seed, rep, tag)``:
the parts are folded through the SplitMix64 finalizer, strings first hashed
with FNV-1a. Results therefore do not depend on how many workers run or in
which order they finish.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return x ^ (x >> 31)


def fnv1a64(s: str) -> int:
    h = 0xCBF29CE484222325
    for byte in s.encode("utf-8"):
        h ^= byte
        h = (h * 0x100000001B3) & _MASK
    return h


def hash64(*parts: int | str) -> int:
    h = 0x243F6A8885A308D3
    for p in parts:
        v = fnv1a64(p) if isinstance(p, str) else int(p) & _MASK
        h = splitmix64(h ^ splitmix64(v))
    return h


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed) & _MASK))


def derive_rng(base_seed: int, *parts: int | str) -> np.random.Generator:
    return make_rng(hash64(base_seed, *parts))


def uniform(rng: np.random.Generator, size) -> np.ndarray:
    """Doubles in [0, 1)."""
    return rng.random(size)


def standard_normal(rng: np.random.Generator, size) -> np.ndarray:
    shape = (size,) if np.isscalar(size) else tuple(size)
    n = int(np.prod(shape, dtype=np.int64))
    if n == 0:
        return np.zeros(shape)
    half = (n + 1) // 2
    u = rng.random((2, half))
    radius = np.sqrt(-2.0 * np.log1p(-u[0]))  # 1 - u in (0, 1]
    angle = 2.0 * np.pi * u[1]
    out = np.concatenate([radius * np.cos(angle), radius * np.sin(angle)])
    return out[:n].reshape(shape)
