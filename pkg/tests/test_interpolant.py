import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gensdr import seeding
from gensdr.errors import ConfigError, ShapeError
from gensdr.interpolant import (
    STRAIGHT,
    TRIG,
    assemble_batch,
    interpolate,
    make_batch,
    schedule_eval,
    schedule_psi,
    velocity_target,
)

unit_t = st.floats(0.0, 1.0, allow_nan=False)


def test_straight_line_at_zero():
    assert tuple(map(float, schedule_eval(STRAIGHT, 0.0))) == (1.0, 0.0, -1.0, 1.0)


def test_straight_line_at_half():
    assert tuple(map(float, schedule_eval(STRAIGHT, 0.5))) == (0.5, 0.5, -1.0, 1.0)


def test_trig_at_half():
    a, b, da, db = schedule_eval(TRIG, 0.5)
    r = math.sqrt(2) / 2
    assert np.allclose([a, b, da, db], [r, r, -math.pi * r / 2, math.pi * r / 2], atol=1e-15, rtol=0)


@pytest.mark.parametrize("t", [-0.1, 1.5, float("nan")])
def test_time_outside_unit_interval(t):
    with pytest.raises(ConfigError):
        schedule_eval(STRAIGHT, t)


@pytest.mark.parametrize("sched", [STRAIGHT, TRIG])
def test_boundary_values_exact(sched):
    a0, b0, _, _ = schedule_eval(sched, 0.0)
    a1, b1, _, _ = schedule_eval(sched, 1.0)
    assert (a0, b1) == (1.0, 1.0)
    assert b0 == 0.0 and abs(a1) < 1e-16


@pytest.mark.parametrize("sched", [STRAIGHT, TRIG])
def test_derivatives_match_finite_differences(sched):
    t = np.linspace(0.05, 0.95, 19)
    h = 1e-6
    a_p, b_p, da_p, db_p = sched.coefficients(t + h)
    a_m, b_m, da_m, db_m = sched.coefficients(t - h)
    _, _, da, db = sched.coefficients(t)
    dda, ddb = sched.second_derivatives(t)
    assert np.allclose((a_p - a_m) / (2 * h), da, atol=1e-8)
    assert np.allclose((b_p - b_m) / (2 * h), db, atol=1e-8)
    assert np.allclose((da_p - da_m) / (2 * h), dda, atol=1e-6)
    assert np.allclose((db_p - db_m) / (2 * h), ddb, atol=1e-6)


def test_interpolate_endpoints():
    y0, y1 = np.array([1.0, -3.0]), np.array([0.25, 7.0])
    assert np.array_equal(interpolate(STRAIGHT, y0, y1, 0.0), y0)
    assert np.array_equal(interpolate(STRAIGHT, y0, y1, 1.0), y1)


def test_interpolate_quarter():
    assert np.allclose(interpolate(STRAIGHT, [1.0, 0.0], [0.0, 2.0], 0.25), [0.75, 0.5], rtol=0, atol=1e-15)


def test_dimension_mismatch():
    with pytest.raises(ShapeError):
        interpolate(STRAIGHT, [1.0], [1.0, 2.0], 0.3)
    with pytest.raises(ShapeError):
        velocity_target(STRAIGHT, [1.0], [1.0, 2.0], 0.3)


@given(unit_t, st.lists(st.floats(-10, 10), min_size=3, max_size=3), st.lists(st.floats(-10, 10), min_size=3, max_size=3))
def test_straight_line_target_is_difference_for_every_t(t, y0, y1):
    assert np.array_equal(velocity_target(STRAIGHT, y0, y1, t), np.array(y1) - np.array(y0))


def test_equal_endpoints_give_zero_target():
    v = np.array([2.0, -1.0])
    assert np.array_equal(velocity_target(STRAIGHT, v, v, 0.7), np.zeros(2))


def test_trig_target_at_zero():
    assert velocity_target(TRIG, [1.0], [0.0], 0.0)[0] == 0.0


@given(unit_t, st.floats(-5, 5), st.floats(-5, 5))
def test_endpoint_identities_for_trig(t, y0, y1):
    assert interpolate(TRIG, [y0], [y1], 0.0)[0] == y0
    assert abs(interpolate(TRIG, [y0], [y1], 1.0)[0] - y1) < 1e-15 * (1 + abs(y0))


def _xy(n=50, seed=0):
    rng = seeding.make_rng(seed)
    return seeding.standard_normal(rng, (n, 3)), seeding.standard_normal(rng, (n, 2))


def test_batch_times_respect_tau():
    X, Y = _xy(400)
    batch = make_batch(X, Y, STRAIGHT, 0.5, seeding.make_rng(1))
    assert np.all(batch.t <= 0.5) and np.all(batch.t >= 0.0)


def test_batch_noise_moments():
    n = 100_000
    batch = make_batch(np.zeros((n, 1)), np.zeros((n, 1)), STRAIGHT, 0.0, seeding.make_rng(3))
    assert abs(batch.eta.mean()) < 0.02
    assert abs(batch.eta.var() - 1.0) < 0.02


def test_batch_is_deterministic():
    X, Y = _xy()
    a = make_batch(X, Y, TRIG, 0.01, seeding.make_rng(9))
    b = make_batch(X, Y, TRIG, 0.01, seeding.make_rng(9))
    for f in ("eta", "t", "Y_t", "target"):
        assert np.array_equal(getattr(a, f), getattr(b, f))


@pytest.mark.parametrize("tau", [-0.01, 0.6])
def test_batch_rejects_bad_tau(tau):
    X, Y = _xy()
    with pytest.raises(ConfigError):
        make_batch(X, Y, STRAIGHT, tau, seeding.make_rng(0))


def test_batch_rejects_row_mismatch():
    X, Y = _xy()
    with pytest.raises(ShapeError):
        make_batch(X, Y[:-1], STRAIGHT, 0.0, seeding.make_rng(0))


@settings(max_examples=20)
@given(st.integers(0, 2**31), st.sampled_from([STRAIGHT, TRIG]), st.floats(0.0, 0.5))
def test_batch_fields_recompute_exactly(seed, sched, tau):
    X, Y = _xy(20, seed)
    batch = make_batch(X, Y, sched, tau, seeding.make_rng(seed))
    again = assemble_batch(batch.X, batch.Y, batch.eta, batch.t, sched, tau)
    assert np.array_equal(again.Y_t, batch.Y_t)
    assert np.array_equal(again.target, batch.target)
    a, b, da, db = sched.coefficients(batch.t)
    for i in range(batch.n):
        assert np.allclose(batch.Y_t[i], a[i] * batch.eta[i] + b[i] * batch.Y[i], rtol=0, atol=1e-15)
        assert np.allclose(batch.target[i], da[i] * batch.eta[i] + db[i] * batch.Y[i], rtol=0, atol=1e-15)


@pytest.mark.parametrize("tau, expected", [(0.5, 2.0), (0.001, 1000.0), (1 / 3, 3.0)])
def test_psi_straight_line(tau, expected):
    assert schedule_psi(STRAIGHT, tau) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("tau", [0.0, 0.7])
def test_psi_rejects_tau(tau):
    with pytest.raises(ConfigError):
        schedule_psi(STRAIGHT, tau)


def test_psi_with_vanishing_alpha():
    from gensdr.interpolant import Schedule

    bad = Schedule("custom", lambda t: (0.5 - t, t, -1 + 0 * t, 1 + 0 * t, 0 * t, 0 * t))
    with pytest.raises(ConfigError):
        schedule_psi(bad, 0.1)
