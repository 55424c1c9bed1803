import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gensdr import seeding
from gensdr.errors import ConfigError, DenominatorError
from gensdr.interpolant import STRAIGHT, TRIG, Schedule
from gensdr.oracle import (
    WarmUpSpec,
    check_covariance_identity,
    check_time_derivative,
    check_scale_derivative,
    closed_form_g0,
    coefficient_suprema,
    conditional_moments,
    exact_flow_scale,
    gaussian_conditional_velocity,
    joint_gaussian_posterior,
    velocity_time_derivative,
    velocity_gradient_z,
    coefficient_bound,
    run_checks,
    transport_residual,
    warmup_sample,
)

SCHEDULES = [STRAIGHT, TRIG]
ZERO = Schedule("custom", lambda t: tuple(0 * t for _ in range(6)))


def test_unit_scale_midpoint_is_zero():
    assert np.array_equal(closed_form_g0(1.0, [1.0, -2.0], 0.5), [0.0, 0.0])


def test_scale_two_midpoint():
    # numerator -1 * 0.5 + 1 * 0.5 * 4 = 1.5, denominator 0.25 + 0.25 * 4 = 1.25
    assert np.allclose(closed_form_g0(2.0, [1.0, 0.0], 0.5), [1.2, 0.0], rtol=0, atol=1e-15)


@pytest.mark.parametrize("z", [0.3, 1.0, 4.0])
def test_start_time_reverses_state(z):
    y = np.array([0.4, -1.0])
    assert np.allclose(closed_form_g0(z, y, 0.0), -y, rtol=0, atol=1e-15)


def test_zero_denominator():
    with pytest.raises(DenominatorError):
        closed_form_g0(1.0, [1.0], 0.5, ZERO)
    with pytest.raises(DenominatorError):
        gaussian_conditional_velocity(1.0, [1.0], 0.5, ZERO)


@pytest.mark.parametrize("z, t, y, expected", [(2.0, 0.5, [1.0, 0.0], [1.2, 0.0]), (1.0, 0.5, [0.3, 0.7], [0, 0])])
def test_joint_conditioning_examples(z, t, y, expected):
    assert np.allclose(gaussian_conditional_velocity(z, y, t), expected, rtol=0, atol=1e-14)


def test_joint_conditioning_at_start_time():
    y = np.array([1.5, -0.5])
    e_eta, e_y, _ = joint_gaussian_posterior(2.0, y, 0.0)
    assert np.allclose(e_eta, y, atol=1e-15) and np.allclose(e_y, 0, atol=1e-15)
    assert np.allclose(gaussian_conditional_velocity(2.0, y, 0.0), -y, atol=1e-15)


@settings(max_examples=60)
@given(st.floats(0.2, 6), st.floats(0.01, 0.99), st.sampled_from(SCHEDULES),
       st.lists(st.floats(-5, 5), min_size=1, max_size=3))
def test_two_routes_agree(z, t, sched, y):
    assert np.max(np.abs(closed_form_g0(z, y, t, sched) - gaussian_conditional_velocity(z, y, t, sched))) < 1e-10


@settings(max_examples=60)
@given(st.floats(0.2, 6), st.floats(0.01, 0.99), st.sampled_from(SCHEDULES))
def test_conditional_moments_match_schur_complement(z, t, sched):
    y = np.array([0.3, -1.1])
    mom = conditional_moments(z, t, sched)
    _, e_y, cov = joint_gaussian_posterior(z, y, t, sched)
    assert np.allclose(e_y, mom.mean(y), atol=1e-12)
    assert np.allclose(cov, mom.cov * np.eye(2), atol=1e-12)
    assert mom.cov > 0


def test_conditional_variance_vanishes_at_terminal_time():
    assert conditional_moments(2.0, 1.0).cov == 0.0
    assert conditional_moments(2.0, 1.0 - 1e-6).cov < 1e-11


@pytest.mark.parametrize("z, t", [(2.0, 0.5), (1.0, 0.5)])
def test_covariance_identity_examples(z, t):
    assert check_covariance_identity(z, t) < 1e-10


def test_covariance_identity_rejects_endpoints():
    for t in (0.0, 1.0):
        with pytest.raises(ConfigError):
            check_covariance_identity(1.0, t)


@settings(max_examples=60)
@given(st.floats(0.2, 6), st.floats(0.02, 0.98), st.sampled_from(SCHEDULES))
def test_covariance_identity_everywhere(z, t, sched):
    assert check_covariance_identity(z, t, sched) < 1e-10


def test_time_derivative_example():
    assert check_time_derivative(2.0, [1.0, 0.0], 0.5, h=1e-5) < 1e-6
    assert check_time_derivative(1.0, [1.0, 0.0], 0.5, h=1e-5) < 1e-6


def test_time_derivative_odd_in_state():
    y = np.array([0.7, -0.2])
    assert np.allclose(velocity_time_derivative(1.5, -y, 0.4), -velocity_time_derivative(1.5, y, 0.4), atol=0)


def test_fd_step_validation():
    with pytest.raises(ConfigError):
        check_time_derivative(1.0, [1.0], 0.5, h=0.0)
    with pytest.raises(ConfigError):
        check_scale_derivative(1.0, [1.0], 0.5, h=1e-14)
    with pytest.raises(ConfigError):
        check_time_derivative(1.0, [1.0], 0.99, h=0.05)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.3, 5), st.floats(0.05, 0.95), st.sampled_from(SCHEDULES),
       st.lists(st.floats(-3, 3), min_size=1, max_size=3))
def test_derivative_identities_hold(z, t, sched, y):
    assert check_time_derivative(z, y, t, sched) < 1e-6
    assert check_scale_derivative(z, y, t, sched) < 1e-6


def test_z_gradient_at_unit_scale_midpoint():
    # c(z, 1/2) = 2 (z^2 - 1) / (1 + z^2); d/dz at z = 1 is 2
    assert np.allclose(velocity_gradient_z(1.0, [1.0, 0.0], 0.5), [2.0, 0.0], atol=1e-14)


@pytest.mark.parametrize("z, y, t, tol", [(1.0, [0.0, 0.0], 0.5, 1e-8), (2.0, [1.0, 1.0], 0.3, 1e-6)])
def test_transport_examples(z, y, t, tol):
    assert transport_residual(z, y, t) < tol


def test_transport_sweep():
    worst = max(transport_residual(z, y, t, sched)
                for sched in SCHEDULES for z in (0.5, 1.0, 2.0) for t in np.arange(1, 10) / 10
                for y in ([0.0, 0.0], [1.0, 1.0]))
    assert worst < 1e-6


def test_transport_detects_wrong_field():
    # the same density path with a velocity off by 10% must leave a residual
    from gensdr import oracle

    y, z, t, h = np.array([1.0, 1.0]), 2.0, 0.3, 1e-5
    dt = (oracle.state_density(y, t + h, z) - oracle.state_density(y, t - h, z)) / (2 * h)
    wrong = lambda v: 1.1 * closed_form_g0(z, v, t) * oracle.state_density(v, t, z)  # noqa: E731
    div = sum((wrong(y + h * e)[j] - wrong(y - h * e)[j]) / (2 * h) for j, e in enumerate(np.eye(2)))
    assert abs(dt + div) / max(abs(dt), abs(div)) > 1e-2


def test_coefficient_bound_unit_scale():
    sup = coefficient_suprema(1.0, 1.0)
    assert sup.sup_c == 1.0
    assert coefficient_bound(1.0, 1.0) >= 1.0


def test_coefficient_bound_wide_range_matches_pointwise_sweep():
    from gensdr.oracle import velocity_coefficient

    sup = coefficient_suprema(0.5, 2.0, n_t=401, n_z=31)
    ts, zs, h = np.linspace(0, 1, 401), np.linspace(0.5, 2.0, 31), 1e-6
    c = max(abs(velocity_coefficient(z, t)) for z in zs for t in ts)
    dz = max(abs(velocity_coefficient(z + h, t) - velocity_coefficient(z - h, t)) / (2 * h) for z in zs for t in ts)
    dt = max(abs(velocity_coefficient(z, t + h) - velocity_coefficient(z, t - h)) / (2 * h)
             for z in zs for t in ts[1:-1])
    assert sup.sup_c == pytest.approx(c, rel=1e-12)
    assert sup.sup_dz == pytest.approx(dz, rel=1e-6)
    assert sup.sup_dt >= dt * (1 - 1e-6)
    assert math.isfinite(sup.value)


def test_coefficient_bound_errors():
    with pytest.raises(ConfigError):
        coefficient_bound(0.0, 1.0)
    with pytest.raises(ConfigError):
        coefficient_bound(2.0, 1.0)


@pytest.mark.parametrize("sched", SCHEDULES)
@pytest.mark.parametrize("z", [0.5, 1.0, 2.0, 5.0])
def test_exact_flow_scale_is_representation(sched, z):
    assert exact_flow_scale(z, sched) == pytest.approx(z, rel=1e-15)


def test_warmup_sample_moments():
    unit = warmup_sample(1.0, 2, 10_000, seeding.make_rng(3))
    assert np.all(np.abs(unit.mean(axis=0)) < 0.05) and np.all(np.abs(unit.var(axis=0) - 1) < 0.05)
    wide = warmup_sample(2.0, 2, 10_000, seeding.make_rng(3))
    assert np.all(np.abs(wide.var(axis=0) - 4.0) < 0.2)
    assert np.array_equal(wide, warmup_sample(2.0, 2, 10_000, seeding.make_rng(3)))


def test_warmup_spec_range():
    spec = WarmUpSpec(lambda X: np.exp(X[:, 0]), 2, 1.0, math.e)
    assert spec.representation(np.array([[0.0, 5.0]]))[0] == 1.0
    with pytest.raises(ConfigError):
        spec.representation(np.array([[2.0, 0.0]]))
    with pytest.raises(ConfigError):
        WarmUpSpec(np.exp, 2, 0.0, 1.0)


@pytest.mark.parametrize("sched", SCHEDULES)
def test_suite_passes(sched):
    results = run_checks(sched)
    assert all(r.passed for r in results), [(r.name, r.max_residual, r.error) for r in results]


def test_suite_flags_broken_schedule():
    results = run_checks(ZERO)
    assert not any(r.passed for r in results)
    assert any("DenominatorError" in (r.error or "") for r in results)
