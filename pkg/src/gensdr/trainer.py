"""Joint fitting of the representation network R and the proxy velocity network g.

The objective, for a batch of observations with noise ``eta_i`` and times
``t_i``, is

    (1/n) sum_i || dalpha(t_i) eta_i + dbeta(t_i) Y_i - g(R(X_i), Y_{t_i}, t_i) ||^2

and gradients reach R through the first ``d`` inputs of g.

For responses that are not Euclidean vectors (SPD matrices here) the response
is replaced by a family of scalar kernel features ``h_l(Y) = exp(-omega ||Y -
y_l||_F)`` and the per-head losses are averaged, with a single shared R.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, DegenerateEnsembleError, NonFiniteError, ShapeError, TrainingDiverged
from .interpolant import STRAIGHT, CsiBatch, Schedule, assemble_batch, check_tau, draw_noise_and_times
from .numerics import AdamState, MlpParams, MlpSpec, adam_step, mlp_apply, mlp_backward, mlp_forward, mlp_init
from . import seeding

log = logging.getLogger(__name__)

HIDDEN = (64, 256, 128)


@dataclass
class TrainConfig:
    epochs: int = 50
    batch_size: int = 128
    lr: float = 1e-3
    tau: float = 1e-3
    seed: int = 0
    resample: bool = True  # False: one (eta, t) draw per observation for the whole run
    hidden_r: tuple[int, ...] = HIDDEN
    hidden_g: tuple[int, ...] = HIDDEN
    clamp_r: Optional[tuple[float, float]] = None
    clamp_g: Optional[tuple[float, float]] = None
    standardize: bool = False
    full_batch: bool = False
    init: str = "torch"

    def __post_init__(self):
        self.hidden_r = tuple(int(h) for h in self.hidden_r)
        self.hidden_g = tuple(int(h) for h in self.hidden_g)
        if self.clamp_r is not None:
            self.clamp_r = tuple(float(c) for c in self.clamp_r)
        if self.clamp_g is not None:
            self.clamp_g = tuple(float(c) for c in self.clamp_g)
        if self.epochs < 0:
            raise ConfigError("epochs must be non-negative")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be at least 1")
        if not self.lr > 0:
            raise ConfigError("learning rate must be positive")
        check_tau(self.tau)

    def to_dict(self) -> dict:
        return asdict(self)


def _mlp_spec(sizes, clamp, init="torch") -> MlpSpec:
    lo, hi = clamp if clamp is not None else (None, None)
    return MlpSpec(tuple(sizes), lo, hi, init=init)


def default_arch(d_x: int, d: int, d_y: int, config: Optional[TrainConfig] = None):
    """``d_x-64-256-128-d`` for R and ``(d+d_y+1)-64-256-128-d_y`` for g."""
    config = config or TrainConfig()
    r = _mlp_spec((d_x, *config.hidden_r, d), config.clamp_r, config.init)
    g = _mlp_spec((d + d_y + 1, *config.hidden_g, d_y), config.clamp_g, config.init)
    return r, g


def _standardizer(X, enabled):
    if not enabled:
        return None, None
    shift = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0.0] = 1.0
    return shift, scale


@dataclass
class GenSdrModel:
    r_net: MlpParams
    g_net: MlpParams
    sched: Schedule = STRAIGHT
    tau: float = 1e-3
    x_shift: Optional[np.ndarray] = None
    x_scale: Optional[np.ndarray] = None

    def __post_init__(self):
        d = self.r_net.spec.d_out
        if self.g_net.spec.d_in != d + self.g_net.spec.d_out + 1:
            raise ShapeError(
                f"g input size {self.g_net.spec.d_in} must equal d + d_y + 1 = "
                f"{d + self.g_net.spec.d_out + 1}"
            )

    @property
    def d_x(self) -> int:
        return self.r_net.spec.d_in

    @property
    def d(self) -> int:
        return self.r_net.spec.d_out

    @property
    def d_y(self) -> int:
        return self.g_net.spec.d_out

    def _prep(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if self.x_shift is not None:
            X = (X - self.x_shift) / self.x_scale
        return X

    def represent(self, X) -> np.ndarray:
        return mlp_apply(self.r_net, self._prep(X))

    def velocity(self, z, y, t) -> np.ndarray:
        """g evaluated at representation rows ``z``, states ``y`` and times ``t``."""
        y = np.atleast_2d(y)
        z = np.broadcast_to(np.atleast_2d(z), (y.shape[0], self.d))
        t = np.broadcast_to(np.asarray(t, dtype=np.float64).reshape(-1, 1), (y.shape[0], 1))
        return mlp_apply(self.g_net, np.hstack([z, y, t]))


def _g_input(Z, batch: CsiBatch):
    return np.hstack([Z, batch.Y_t, batch.t[:, None]])


def csi_loss(model: GenSdrModel, batch: CsiBatch) -> float:
    if batch.Y.shape[1] != model.d_y or batch.X.shape[1] != model.d_x:
        raise ShapeError("batch does not match model shapes")
    out = mlp_apply(model.g_net, _g_input(model.represent(batch.X), batch))
    if not np.all(np.isfinite(out)):
        raise NonFiniteError("non-finite velocity prediction", where="g_net")
    res = batch.target - out
    return float(np.mean(np.sum(res * res, axis=1)))


def csi_loss_and_grads(model: GenSdrModel, batch: CsiBatch):
    """Loss plus gradients for both networks (chain rule through g's z inputs)."""
    Zc_out, r_cache = mlp_forward(model.r_net, model._prep(batch.X))
    out, g_cache = mlp_forward(model.g_net, _g_input(Zc_out, batch))
    res = out - batch.target
    n = batch.n
    loss = float(np.sum(res * res) / n)
    g_grads, g_in = mlp_backward(g_cache, (2.0 / n) * res)
    r_grads, _ = mlp_backward(r_cache, g_in[:, : model.d])
    return loss, r_grads, g_grads


def _batches(n, batch_size, full_batch, perm):
    if full_batch:
        return [perm]
    return [perm[s : s + batch_size] for s in range(0, n, batch_size)]


def train(
    X,
    Y,
    config: TrainConfig,
    arch_r: Optional[MlpSpec] = None,
    arch_g: Optional[MlpSpec] = None,
    sched: Schedule = STRAIGHT,
    d: Optional[int] = None,
):
    """Minibatch Adam on the joint (R, g) parameters.

    Either pass both architectures or the representation dimension ``d`` (the
    default architecture is then used). Returns ``(model, per_epoch_loss)``.
    """
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim == 1:
        Y = Y[:, None]
    n, d_x = X.shape
    d_y = Y.shape[1]
    if Y.shape[0] != n:
        raise ShapeError(f"X has {n} rows but Y has {Y.shape[0]}")
    if arch_r is None or arch_g is None:
        if d is None:
            raise ConfigError("need the representation dimension d or explicit architectures")
        arch_r, arch_g = default_arch(d_x, d, d_y, config)
    if arch_r.d_in != d_x or arch_g.d_out != d_y:
        raise ShapeError("architectures do not match the data")
    if not config.full_batch and n < config.batch_size:
        raise ConfigError(f"n={n} is smaller than batch_size={config.batch_size}")

    rng = seeding.make_rng(config.seed)
    shift, scale = _standardizer(X, config.standardize)
    model = GenSdrModel(mlp_init(arch_r, rng), mlp_init(arch_g, rng), sched, config.tau, shift, scale)
    n_r = 2 * model.r_net.n_layers
    tensors = model.r_net.tensors() + model.g_net.tensors()
    state = AdamState.zeros_like(tensors, lr=config.lr)
    trace: list[float] = []
    if not config.resample:
        eta_all, t_all = draw_noise_and_times(rng, n, d_y, config.tau)

    for epoch in range(config.epochs):
        perm = rng.permutation(n)
        if config.resample:
            eta_all, t_all = draw_noise_and_times(rng, n, d_y, config.tau)
        total = 0.0
        for idx in _batches(n, config.batch_size, config.full_batch, perm):
            batch = assemble_batch(X[idx], Y[idx], eta_all[idx], t_all[idx], sched, config.tau)
            loss, gr, gg = csi_loss_and_grads(model, batch)
            if not np.isfinite(loss):
                raise TrainingDiverged(f"non-finite loss in epoch {epoch}", trace)
            try:
                tensors, state = adam_step(tensors, gr.tensors() + gg.tensors(), state)
            except NonFiniteError as exc:
                raise TrainingDiverged(f"epoch {epoch}: {exc}", trace) from exc
            model.r_net = MlpParams.from_tensors(tensors[:n_r], arch_r)
            model.g_net = MlpParams.from_tensors(tensors[n_r:], arch_g)
            total += loss * len(idx)
        trace.append(total / n)
        log.debug("epoch %d loss %.6g", epoch, trace[-1])
    return model, trace


# ---------------------------------------------------------------------------
# kernel ensemble for object-valued responses


def _flat(Ys):
    Ys = np.asarray(Ys, dtype=np.float64)
    return Ys.reshape(Ys.shape[0], -1)


def frobenius_distances(A, B) -> np.ndarray:
    """Pairwise Frobenius (flattened Euclidean) distances, shape ``(len(A), len(B))``."""
    A, B = _flat(A), _flat(B)
    diff = A[:, None, :] - B[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=2))


@dataclass
class EnsembleSpec:
    references: np.ndarray  # reference responses, shape (k, ...)
    omega: float
    head_indices: np.ndarray  # indices into references, one per active head

    def __post_init__(self):
        self.references = np.asarray(self.references, dtype=np.float64)
        self.head_indices = np.asarray(self.head_indices, dtype=np.int64)
        if not (np.isfinite(self.omega) and self.omega > 0):
            raise ConfigError(f"kernel bandwidth must be finite and positive, got {self.omega}")
        if self.m > len(self.references) or self.m < 1:
            raise ConfigError("need 1 <= m <= number of references")

    @property
    def m(self) -> int:
        return len(self.head_indices)

    @property
    def centers(self) -> np.ndarray:
        return self.references[self.head_indices]


def build_kernel_ensemble(Ys, fraction: float = 0.5, rng=None, m: int = 8) -> EnsembleSpec:
    """Reference set = random ``floor(fraction * n)`` responses; bandwidth = 1 / median
    distance between all responses and the references; ``m`` heads drawn from the
    references."""
    Ys = np.asarray(Ys, dtype=np.float64)
    n = Ys.shape[0]
    if n < 2:
        raise ConfigError("need at least two responses")
    if not 0.0 < fraction <= 1.0:
        raise ConfigError("fraction must lie in (0, 1]")
    rng = rng if rng is not None else seeding.make_rng(0)
    k = max(1, int(np.floor(fraction * n)))
    ref_idx = np.sort(rng.permutation(n)[:k])
    refs = Ys[ref_idx]
    med = float(np.median(frobenius_distances(Ys, refs)))
    if med == 0.0:
        raise DegenerateEnsembleError("median response distance is zero; responses coincide")
    if m > k:
        raise ConfigError(f"m={m} exceeds the reference set size {k}")
    heads = np.sort(rng.permutation(k)[:m])
    return EnsembleSpec(refs, 1.0 / med, heads)


def ensemble_features(spec: EnsembleSpec, Ys) -> np.ndarray:
    """``h_l(Y_i)`` for every response and head, shape ``(n, m)``."""
    return np.exp(-spec.omega * frobenius_distances(Ys, spec.centers))


def ensemble_feature(spec: EnsembleSpec, Y, l: int) -> float:
    if not 0 <= l < spec.m:
        raise ConfigError(f"head index {l} out of range for m={spec.m}")
    Y = np.asarray(Y, dtype=np.float64)
    dist = np.sqrt(np.sum((Y - spec.centers[l]) ** 2))
    return float(np.exp(-spec.omega * dist))


@dataclass
class EnsembleModel:
    r_net: MlpParams
    spec: EnsembleSpec
    mode: str  # "shared": trunk + per-head embeddings; "exact": one network per head
    heads: list[MlpParams] = field(default_factory=list)
    trunk: Optional[MlpParams] = None
    embeddings: Optional[np.ndarray] = None
    sched: Schedule = STRAIGHT
    tau: float = 1e-3
    x_shift: Optional[np.ndarray] = None
    x_scale: Optional[np.ndarray] = None

    @property
    def d(self) -> int:
        return self.r_net.spec.d_out

    def represent(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if self.x_shift is not None:
            X = (X - self.x_shift) / self.x_scale
        return mlp_apply(self.r_net, X)

    def head_model(self, l: int) -> GenSdrModel:
        """Scalar-response model for head ``l`` (exact mode only)."""
        if self.mode != "exact":
            raise ConfigError("per-head models exist only in exact mode")
        return GenSdrModel(self.r_net, self.heads[l], self.sched, self.tau, self.x_shift, self.x_scale)


def _head_subset(rng, m, per_batch):
    if per_batch >= m:
        return np.arange(m)
    return np.sort(rng.permutation(m)[:per_batch])


def _shared_loss_and_grads(model: EnsembleModel, Xb, Hb, eta, t, heads):
    """Loss averaged over the ``B * S`` (row, head) pairs, head-major layout."""
    sched = model.sched
    B, S = Xb.shape[0], len(heads)
    d = model.d
    Z, r_cache = mlp_forward(model.r_net, Xb)
    a, b, da, db = sched.coefficients(t)
    H = Hb[:, heads].T  # (S, B)
    yt = (a * eta[:, 0])[None, :] + b[None, :] * H
    target = (da * eta[:, 0])[None, :] + db[None, :] * H
    E = model.embeddings[heads]
    inp = np.empty((S, B, d + 2 + E.shape[1]))
    inp[:, :, :d] = Z[None, :, :]
    inp[:, :, d] = yt
    inp[:, :, d + 1] = t[None, :]
    inp[:, :, d + 2 :] = E[:, None, :]
    out, g_cache = mlp_forward(model.trunk, inp.reshape(S * B, -1))
    res = out[:, 0] - target.ravel()
    loss = float(np.sum(res * res) / (S * B))
    g_grads, g_in = mlp_backward(g_cache, (2.0 / (S * B)) * res[:, None])
    g_in = g_in.reshape(S, B, -1)
    grad_Z = g_in[:, :, :d].sum(axis=0)
    grad_E = np.zeros_like(model.embeddings)
    grad_E[heads] = g_in[:, :, d + 2 :].sum(axis=1)
    r_grads, _ = mlp_backward(r_cache, grad_Z)
    return loss, r_grads, g_grads, grad_E


def _exact_loss_and_grads(model: EnsembleModel, Xb, Hb, eta, t, heads):
    """Mean over evaluated heads of the scalar-response loss of each head."""
    Z, r_cache = mlp_forward(model.r_net, Xb)
    S = len(heads)
    d = model.d
    total = 0.0
    grad_Z = None
    head_grads = {}
    for l in heads:
        batch = assemble_batch(Xb, Hb[:, l : l + 1], eta, t, model.sched, model.tau)
        out, g_cache = mlp_forward(model.heads[l], _g_input(Z, batch))
        res = out - batch.target
        total += float(np.sum(res * res) / batch.n)
        gg, g_in = mlp_backward(g_cache, (2.0 / (batch.n * S)) * res)
        head_grads[int(l)] = gg
        grad_Z = g_in[:, :d] if grad_Z is None else grad_Z + g_in[:, :d]
    r_grads, _ = mlp_backward(r_cache, grad_Z)
    return total / S, r_grads, head_grads


def train_ensemble(
    X,
    Ys,
    spec: EnsembleSpec,
    config: TrainConfig,
    d: int = 1,
    sched: Schedule = STRAIGHT,
    mode: str = "exact",
    heads_per_batch: int = 16,
    embed_dim: int = 8,
    features: Optional[np.ndarray] = None,
):
    """Fit a shared R against ``spec.m`` scalar kernel-feature responses.

    ``features`` may carry precomputed ``h_l(Y_i)`` (shape ``(n, m)``); otherwise
    they are computed from ``Ys``. Returns ``(model, per_epoch_loss)``.
    """
    if mode not in ("shared", "exact"):
        raise ConfigError(f"unknown ensemble mode {mode!r}")
    X = np.asarray(X, dtype=np.float64)
    n, d_x = X.shape
    H = ensemble_features(spec, Ys) if features is None else np.asarray(features, dtype=np.float64)
    if H.shape != (n, spec.m):
        raise ShapeError(f"features shape {H.shape}, expected {(n, spec.m)}")
    if not config.full_batch and n < config.batch_size:
        raise ConfigError(f"n={n} is smaller than batch_size={config.batch_size}")
    m = spec.m
    tau = config.tau

    rng = seeding.make_rng(config.seed)
    shift, scale = _standardizer(X, config.standardize)
    Xs = X if shift is None else (X - shift) / scale
    r_spec = _mlp_spec((d_x, *config.hidden_r, d), config.clamp_r, config.init)
    model = EnsembleModel(mlp_init(r_spec, rng), spec, mode, sched=sched, tau=tau, x_shift=shift, x_scale=scale)
    if mode == "exact":
        g_spec = _mlp_spec((d + 2, *config.hidden_g, 1), config.clamp_g, config.init)
        model.heads = [mlp_init(g_spec, rng) for _ in range(m)]
        tensors = model.r_net.tensors() + [t for h in model.heads for t in h.tensors()]
    else:
        g_spec = _mlp_spec((d + 2 + embed_dim, *config.hidden_g, 1), config.clamp_g, config.init)
        model.trunk = mlp_init(g_spec, rng)
        model.embeddings = seeding.standard_normal(rng, (m, embed_dim))
        tensors = model.r_net.tensors() + model.trunk.tensors() + [model.embeddings]
    n_r = 2 * model.r_net.n_layers
    n_g = 2 * (len(g_spec.layer_sizes) - 1)
    state = AdamState.zeros_like(tensors, lr=config.lr)
    trace: list[float] = []
    if not config.resample:
        eta_all, t_all = draw_noise_and_times(rng, n, 1, tau)

    for epoch in range(config.epochs):
        perm = rng.permutation(n)
        if config.resample:
            eta_all, t_all = draw_noise_and_times(rng, n, 1, tau)
        total = 0.0
        for idx in _batches(n, config.batch_size, config.full_batch, perm):
            heads = _head_subset(rng, m, heads_per_batch)
            if mode == "shared":
                loss, gr, gg, gE = _shared_loss_and_grads(model, Xs[idx], H[idx], eta_all[idx], t_all[idx], heads)
                grads = gr.tensors() + gg.tensors() + [gE]
            else:
                loss, gr, head_grads = _exact_loss_and_grads(model, Xs[idx], H[idx], eta_all[idx], t_all[idx], heads)
                grads = gr.tensors()
                for l in range(m):
                    if l in head_grads:
                        grads += head_grads[l].tensors()
                    else:
                        grads += [np.zeros_like(x) for x in model.heads[l].tensors()]
            if not np.isfinite(loss):
                raise TrainingDiverged(f"non-finite loss in epoch {epoch}", trace)
            try:
                tensors, state = adam_step(tensors, grads, state)
            except NonFiniteError as exc:
                raise TrainingDiverged(f"epoch {epoch}: {exc}", trace) from exc
            model.r_net = MlpParams.from_tensors(tensors[:n_r], r_spec)
            if mode == "shared":
                model.trunk = MlpParams.from_tensors(tensors[n_r : n_r + n_g], g_spec)
                model.embeddings = tensors[-1]
            else:
                model.heads = [
                    MlpParams.from_tensors(tensors[n_r + l * n_g : n_r + (l + 1) * n_g], g_spec)
                    for l in range(m)
                ]
            total += loss * len(idx)
        trace.append(total / n)
        log.debug("epoch %d ensemble loss %.6g", epoch, trace[-1])
    return model, trace


def ensemble_batch_loss(model: EnsembleModel, X, H, eta, t, heads: Optional[Sequence[int]] = None) -> float:
    """Head-averaged loss of a fitted ensemble on explicit draws ``(eta, t)``."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if model.x_shift is not None:
        X = (X - model.x_shift) / model.x_scale
    heads = np.arange(model.spec.m) if heads is None else np.asarray(heads)
    eta = np.asarray(eta, dtype=np.float64).reshape(-1, 1)
    t = np.asarray(t, dtype=np.float64)
    H = np.asarray(H, dtype=np.float64)
    if model.mode == "shared":
        return _shared_loss_and_grads(model, X, H, eta, t, heads)[0]
    return _exact_loss_and_grads(model, X, H, eta, t, heads)[0]
