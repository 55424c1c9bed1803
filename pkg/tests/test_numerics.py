import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gensdr import seeding
from gensdr.errors import ConfigError, NonFiniteError, ShapeError
from gensdr.numerics import (
    AdamState,
    MlpParams,
    MlpSpec,
    adam_step,
    mlp_apply,
    mlp_backward,
    mlp_forward,
    mlp_from_dict,
    mlp_init,
    mlp_to_dict,
)


def fd_gradients(params, X, G, h=1e-5):
    """Central differences of sum(G * f(X)) w.r.t. every parameter and input."""
    def objective(p, x):
        return float(np.sum(G * mlp_apply(p, x)))

    grads = []
    for k, tensor in enumerate(params.tensors()):
        g = np.zeros_like(tensor)
        for idx in np.ndindex(tensor.shape):
            plus = [t.copy() for t in params.tensors()]
            minus = [t.copy() for t in params.tensors()]
            plus[k][idx] += h
            minus[k][idx] -= h
            g[idx] = (objective(MlpParams.from_tensors(plus, params.spec), X)
                      - objective(MlpParams.from_tensors(minus, params.spec), X)) / (2 * h)
        grads.append(g)
    gx = np.zeros_like(X)
    for idx in np.ndindex(X.shape):
        xp, xm = X.copy(), X.copy()
        xp[idx] += h
        xm[idx] -= h
        gx[idx] = (objective(params, xp) - objective(params, xm)) / (2 * h)
    return grads, gx


def rel_err(a, b):
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-8))


def test_parameter_count_default_architecture():
    assert MlpSpec((50, 64, 256, 128, 1)).n_params() == 52929
    assert mlp_init(MlpSpec((50, 64, 256, 128, 1))).n_params() == 52929


def test_parameter_count_single_layer():
    assert MlpSpec((3, 3)).n_params() == 12


def test_init_is_deterministic():
    spec = MlpSpec((4, 8, 2), seed=7)
    a, b = mlp_init(spec), mlp_init(spec)
    for x, y in zip(a.tensors(), b.tensors()):
        assert np.array_equal(x, y)


@pytest.mark.parametrize("init", ["torch", "he"])
def test_init_bounds(init):
    spec = MlpSpec((20, 30, 5), init=init)
    p = mlp_init(spec, seeding.make_rng(1))
    for w, b in zip(p.weights, p.biases):
        fan_in = w.shape[1]
        bound = 1 / np.sqrt(fan_in) if init == "torch" else np.sqrt(6 / fan_in)
        assert np.all(np.abs(w) <= bound)
        if init == "he":
            assert np.all(b == 0)
        else:
            assert np.all(np.abs(b) <= bound)


@pytest.mark.parametrize("sizes", [(3,), (3, 0, 1), (0, 2)])
def test_bad_layer_sizes(sizes):
    with pytest.raises(ConfigError):
        MlpSpec(sizes)


def test_bad_clamps():
    with pytest.raises(ConfigError):
        MlpSpec((2, 2), 1.0, 0.0)
    with pytest.raises(ConfigError):
        MlpSpec((2, 2), 0.0, None)


def test_identity_layer():
    spec = MlpSpec((3, 3))
    p = MlpParams([np.eye(3)], [np.zeros(3)], spec)
    x = np.array([[1.0, -2.0, 3.5]])
    assert np.array_equal(mlp_apply(p, x), x)


def test_hand_evaluated_two_layer_net():
    spec = MlpSpec((1, 2, 1))
    p = MlpParams([np.array([[1.0], [-1.0]]), np.array([[1.0, 1.0]])], [np.zeros(2), np.zeros(1)], spec)
    out, cache = mlp_forward(p, np.array([[-2.0]]))
    assert out[0, 0] == 2.0
    assert np.array_equal(np.maximum(cache.preacts[0], 0), [[0.0, 2.0]])


def test_clamp_saturates():
    spec = MlpSpec((1, 1), 0.0, 1.0)
    p = MlpParams([np.array([[1.0]])], [np.zeros(1)], spec)
    assert mlp_apply(p, np.array([[3.0]]))[0, 0] == 1.0


def test_forward_shape_mismatch():
    p = mlp_init(MlpSpec((3, 2)))
    with pytest.raises(ShapeError):
        mlp_forward(p, np.zeros((4, 2)))


def test_linear_backward_matches_hand_formula():
    spec = MlpSpec((2, 2))
    W = np.array([[1.0, 2.0], [3.0, 4.0]])
    p = MlpParams([W], [np.zeros(2)], spec)
    X = np.array([[1.0, -1.0], [0.5, 2.0]])
    G = np.array([[1.0, 0.0], [2.0, -1.0]])
    _, cache = mlp_forward(p, X)
    grads, gx = mlp_backward(cache, G)
    assert np.allclose(grads.weights[0], G.T @ X)
    assert np.allclose(grads.biases[0], G.sum(axis=0))
    assert np.allclose(gx, G @ W)


def test_dead_relu_blocks_gradient():
    spec = MlpSpec((1, 2, 1))
    p = MlpParams([np.array([[1.0], [1.0]]), np.array([[1.0, 1.0]])], [np.array([-5.0, -5.0]), np.zeros(1)], spec)
    _, cache = mlp_forward(p, np.array([[1.0], [2.0]]))
    grads, gx = mlp_backward(cache, np.ones((2, 1)))
    assert np.all(grads.weights[0] == 0) and np.all(grads.biases[0] == 0)
    assert np.all(gx == 0)


def test_clamp_blocks_gradient_outside_bounds():
    spec = MlpSpec((1, 1), 0.0, 1.0)
    p = MlpParams([np.array([[1.0]])], [np.zeros(1)], spec)
    _, cache = mlp_forward(p, np.array([[3.0], [0.5]]))
    grads, gx = mlp_backward(cache, np.ones((2, 1)))
    assert grads.weights[0][0, 0] == 0.5
    assert gx[0, 0] == 0.0 and gx[1, 0] == 1.0


def test_backward_rejects_wrong_grad_shape():
    p = mlp_init(MlpSpec((2, 3)))
    _, cache = mlp_forward(p, np.zeros((4, 2)))
    with pytest.raises(ShapeError):
        mlp_backward(cache, np.zeros((4, 2)))


@settings(max_examples=25, deadline=None)
@given(
    st.lists(st.integers(1, 8), min_size=2, max_size=4),
    st.integers(1, 5),
    st.integers(0, 2**31),
)
def test_backward_matches_finite_differences(sizes, n, seed):
    rng = seeding.make_rng(seed)
    p = mlp_init(MlpSpec(tuple(sizes)), rng)
    X = seeding.standard_normal(rng, (n, sizes[0]))
    G = seeding.standard_normal(rng, (n, sizes[-1]))
    _, cache = mlp_forward(p, X)
    grads, gx = mlp_backward(cache, G)
    # skip draws with a pre-activation so close to a kink that FD straddles it
    if any(np.min(np.abs(h)) < 1e-3 for h in cache.preacts[:-1]):
        return
    fd, fdx = fd_gradients(p, X, G)
    for a, b in zip(grads.tensors(), fd):
        assert rel_err(a, b) < 1e-5
    assert rel_err(gx, fdx) < 1e-5


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.floats(-3, 3), st.floats(0.1, 3))
def test_clamped_output_stays_in_bounds(seed, lo, width):
    spec = MlpSpec((3, 6, 2), lo, lo + width)
    rng = seeding.make_rng(seed)
    p = mlp_init(spec, rng)
    out = mlp_apply(p, 5 * seeding.standard_normal(rng, (20, 3)))
    assert np.all(out >= lo) and np.all(out <= lo + width)


def test_forward_is_deterministic():
    p = mlp_init(MlpSpec((4, 5, 3), seed=3))
    x = seeding.standard_normal(seeding.make_rng(2), (6, 4))
    assert np.array_equal(mlp_apply(p, x), mlp_apply(p, x))


def test_adam_zero_gradient_keeps_params_and_decays_moments():
    p = [np.array([1.0, 2.0])]
    state = AdamState([np.array([1.0, -1.0])], [np.array([4.0, 4.0])], step=3)
    new_p, new_state = adam_step(p, [np.zeros(2)], state)
    assert np.allclose(new_state.m[0], 0.9 * np.array([1.0, -1.0]))
    assert np.allclose(new_state.v[0], 0.999 * 4.0)
    assert new_state.step == 4
    # moments are non-zero, so the step moves params by lr * mhat / sqrt(vhat)
    fresh_p, _ = adam_step(p, [np.zeros(2)], AdamState.zeros_like(p))
    assert np.array_equal(fresh_p[0], p[0])


@pytest.mark.parametrize("g", [3.0, -0.2, 1e-4])
def test_adam_first_step_moves_by_learning_rate(g):
    p = [np.array([0.5])]
    new_p, state = adam_step(p, [np.array([g])], AdamState.zeros_like(p, lr=1e-3))
    expected = 1e-3 * abs(g) / (abs(g) + 1e-8)
    assert abs(abs(new_p[0][0] - 0.5) - expected) < 1e-15
    assert np.sign(0.5 - new_p[0][0]) == np.sign(g)
    assert state.step == 1


def test_adam_rejects_non_finite_gradient():
    p = [np.zeros(2), np.zeros(3)]
    with pytest.raises(NonFiniteError) as info:
        adam_step(p, [np.zeros(2), np.array([0.0, np.nan, 0.0])], AdamState.zeros_like(p))
    assert info.value.where == 1


def test_adam_rejects_shape_mismatch():
    p = [np.zeros(2)]
    with pytest.raises(ShapeError):
        adam_step(p, [np.zeros(3)], AdamState.zeros_like(p))


def test_adam_trajectories_repeat():
    rng = seeding.make_rng(5)
    grads = [[seeding.standard_normal(rng, 4)] for _ in range(10)]

    def run():
        p, s = [np.ones(4)], AdamState.zeros_like([np.ones(4)])
        for g in grads:
            p, s = adam_step(p, g, s)
        return p[0]

    assert np.array_equal(run(), run())


def test_serialization_round_trip_is_exact():
    p = mlp_init(MlpSpec((3, 4, 2), -1.0, 1.0, seed=11))
    q = mlp_from_dict(mlp_to_dict(p))
    assert q.spec == p.spec
    for a, b in zip(p.tensors(), q.tensors()):
        assert np.array_equal(a, b)
