"""ReLU multilayer perceptrons with hand-written backprop, and Adam.

Arrays are float64 numpy arrays throughout. A weight matrix for layer ``i``
has shape ``(d_i, d_{i-1})`` and a batch is ``(n, d_in)``, so the affine map
is ``a @ W.T + b``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, NonFiniteError, ShapeError
from . import seeding


INIT_SCHEMES = ("torch", "he")


@dataclass(frozen=True)
class MlpSpec:
    layer_sizes: tuple[int, ...]
    clamp_lo: Optional[float] = None
    clamp_hi: Optional[float] = None
    seed: int = 0
    init: str = "torch"

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        object.__setattr__(self, "layer_sizes", sizes)
        if len(sizes) < 2:
            raise ConfigError("an MLP needs at least an input and an output size")
        if any(s <= 0 for s in sizes):
            raise ConfigError(f"layer sizes must be positive, got {sizes}")
        if (self.clamp_lo is None) != (self.clamp_hi is None):
            raise ConfigError("clamp_lo and clamp_hi must be set together")
        if self.clamp_lo is not None and not self.clamp_lo < self.clamp_hi:
            raise ConfigError("clamp_lo must be below clamp_hi")
        if self.init not in INIT_SCHEMES:
            raise ConfigError(f"unknown init scheme {self.init!r}")

    @property
    def d_in(self) -> int:
        return self.layer_sizes[0]

    @property
    def d_out(self) -> int:
        return self.layer_sizes[-1]

    @property
    def clamped(self) -> bool:
        return self.clamp_lo is not None

    def n_params(self) -> int:
        s = self.layer_sizes
        return sum(s[i] * s[i - 1] + s[i] for i in range(1, len(s)))


@dataclass
class MlpParams:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    spec: MlpSpec

    def __post_init__(self):
        s = self.spec.layer_sizes
        if len(self.weights) != len(s) - 1 or len(self.biases) != len(s) - 1:
            raise ShapeError("number of layers does not match spec")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (s[i + 1], s[i]) or b.shape != (s[i + 1],):
                raise ShapeError(
                    f"layer {i}: got W{w.shape}, b{b.shape}, "
                    f"expected W{(s[i + 1], s[i])}, b{(s[i + 1],)}"
                )

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def tensors(self) -> list[np.ndarray]:
        """Flat list ``[W0, b0, W1, b1, ...]``."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    @classmethod
    def from_tensors(cls, tensors: Sequence[np.ndarray], spec: MlpSpec) -> "MlpParams":
        return cls(list(tensors[0::2]), list(tensors[1::2]), spec)

    def copy(self) -> "MlpParams":
        return MlpParams([w.copy() for w in self.weights], [b.copy() for b in self.biases], self.spec)

    def n_params(self) -> int:
        return sum(t.size for t in self.tensors())


@dataclass
class ForwardCache:
    params: MlpParams
    inputs: list[np.ndarray]  # input to each affine layer
    preacts: list[np.ndarray]  # affine output of each layer
    output: np.ndarray


def mlp_init(spec: MlpSpec, rng: Optional[np.random.Generator] = None) -> MlpParams:
    """Random fan-in scaled uniform initialization.

    ``"torch"``: weights and biases ``U(-1/sqrt(d_in), 1/sqrt(d_in))``, the
    default of ``torch.nn.Linear``. ``"he"``: weights
    ``U(-sqrt(6/d_in), sqrt(6/d_in))``, biases zero.
    """
    if rng is None:
        rng = seeding.make_rng(spec.seed)
    s = spec.layer_sizes
    weights, biases = [], []
    for i in range(1, len(s)):
        fan_in = s[i - 1]
        if spec.init == "he":
            bound = np.sqrt(6.0 / fan_in)
            weights.append((2.0 * seeding.uniform(rng, (s[i], fan_in)) - 1.0) * bound)
            biases.append(np.zeros(s[i]))
        else:
            bound = 1.0 / np.sqrt(fan_in)
            weights.append((2.0 * seeding.uniform(rng, (s[i], fan_in)) - 1.0) * bound)
            biases.append((2.0 * seeding.uniform(rng, s[i]) - 1.0) * bound)
    return MlpParams(weights, biases, spec)


def mlp_forward(params: MlpParams, batch: np.ndarray) -> tuple[np.ndarray, ForwardCache]:
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 2 or batch.shape[1] != params.spec.d_in:
        raise ShapeError(f"batch shape {batch.shape} does not fit input size {params.spec.d_in}")
    inputs, preacts = [], []
    a = batch
    last = params.n_layers - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        inputs.append(a)
        h = a @ w.T + b
        preacts.append(h)
        a = h if i == last else np.maximum(h, 0.0)
    out = a
    if params.spec.clamped:
        out = np.clip(a, params.spec.clamp_lo, params.spec.clamp_hi)
    return out, ForwardCache(params, inputs, preacts, out)


def mlp_apply(params: MlpParams, batch: np.ndarray) -> np.ndarray:
    return mlp_forward(params, batch)[0]


def mlp_backward(cache: ForwardCache, grad_out: np.ndarray) -> tuple[MlpParams, np.ndarray]:
    """Gradients w.r.t. every weight/bias and w.r.t. the input batch.

    The ReLU subgradient at 0 is 0; the clamp passes gradient only where the
    raw output lies inside the bounds.
    """
    params = cache.params
    grad_out = np.asarray(grad_out, dtype=np.float64)
    if grad_out.shape != cache.output.shape:
        raise ShapeError(f"grad_out shape {grad_out.shape} != forward output {cache.output.shape}")
    if len(cache.preacts) != params.n_layers:
        raise ShapeError("cache does not belong to these parameters")
    delta = grad_out
    if params.spec.clamped:
        raw = cache.preacts[-1]
        inside = (raw >= params.spec.clamp_lo) & (raw <= params.spec.clamp_hi)
        delta = delta * inside
    gw = [None] * params.n_layers
    gb = [None] * params.n_layers
    for i in range(params.n_layers - 1, -1, -1):
        gw[i] = delta.T @ cache.inputs[i]
        gb[i] = delta.sum(axis=0)
        delta = delta @ params.weights[i]
        if i > 0:
            delta = delta * (cache.preacts[i - 1] > 0.0)
    return MlpParams(gw, gb, params.spec), delta


# ---------------------------------------------------------------------------
# Adam


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, tensors: Sequence[np.ndarray], lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        return cls(
            [np.zeros_like(t) for t in tensors],
            [np.zeros_like(t) for t in tensors],
            0, lr, beta1, beta2, eps,
        )


def adam_step(
    params: Sequence[np.ndarray], grads: Sequence[np.ndarray], state: AdamState
) -> tuple[list[np.ndarray], AdamState]:
    """One bias-corrected Adam update. Inputs are left untouched."""
    if not (len(params) == len(grads) == len(state.m)):
        raise ShapeError("params, grads and optimizer state differ in length")
    for k, (p, g, m) in enumerate(zip(params, grads, state.m)):
        if p.shape != g.shape or p.shape != m.shape:
            raise ShapeError(f"tensor {k}: shapes {p.shape}, {g.shape}, {m.shape} disagree")
        if not np.all(np.isfinite(g)):
            raise NonFiniteError(f"non-finite gradient in tensor {k}", where=k)
    step = state.step + 1
    b1, b2 = state.beta1, state.beta2
    corr1 = 1.0 - b1**step
    corr2 = 1.0 - b2**step
    new_p, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * (g * g)
        p = p - state.lr * (m / corr1) / (np.sqrt(v / corr2) + state.eps)
        new_p.append(p)
        new_m.append(m)
        new_v.append(v)
    return new_p, AdamState(new_m, new_v, step, state.lr, b1, b2, state.eps)


# ---------------------------------------------------------------------------
# serialization


def mlp_to_dict(params: MlpParams) -> dict:
    spec = params.spec
    return {
        "layer_sizes": list(spec.layer_sizes),
        "clamp_lo": spec.clamp_lo,
        "clamp_hi": spec.clamp_hi,
        "seed": spec.seed,
        "init": spec.init,
        "weights": [w.ravel() for w in params.weights],
        "biases": [b.copy() for b in params.biases],
    }


def mlp_from_dict(d: dict) -> MlpParams:
    spec = MlpSpec(tuple(d["layer_sizes"]), d.get("clamp_lo"), d.get("clamp_hi"), d.get("seed", 0),
                   d.get("init", "torch"))
    s = spec.layer_sizes
    weights = [
        np.asarray(w, dtype=np.float64).reshape(s[i + 1], s[i]) for i, w in enumerate(d["weights"])
    ]
    biases = [np.asarray(b, dtype=np.float64).reshape(s[i + 1]) for i, b in enumerate(d["biases"])]
    return MlpParams(weights, biases, spec)
