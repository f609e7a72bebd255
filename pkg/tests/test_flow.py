import math

import numpy as np
import pytest

from symctl import BlowUpError, FlowConfig, InvalidInputError, integrate, integrate_trace
from symctl.lyapunov import pendulum_cert
from symctl.system import DisturbanceSignal, constant_disturbance, system_from_dict


def scalar(f):
    return system_from_dict({"n": 1, "m": 1, "l": 1, "X": [[-5, 5]], "U": [[-1, 1]], "D": [[-1, 1]], "kappa_d": 1.0, "f": [f]})


def ramp():
    return DisturbanceSignal(lambda t: np.asarray(t)[:, None], 1.0, 1)


def test_equilibrium_stays_put(pendulum):
    x = integrate(pendulum, [0.0, 0.0], [0.0], constant_disturbance([0.0]), FlowConfig(1.0))
    assert np.all(x == 0.0)


def test_linear_closed_form():
    sys = scalar("-x1 + u1")
    for tau in (0.1, 0.5, 1.0):
        x = integrate(sys, [0.7], [0.4], constant_disturbance([0.0]), FlowConfig(tau, 100))
        exact = 0.4 + (0.7 - 0.4) * math.exp(-tau)
        assert abs(x[0] - exact) <= 1e-7


def test_time_varying_disturbance_closed_form():
    # x' = -x + t from 0: x(tau) = tau - 1 + exp(-tau)
    sys = scalar("-x1 + d1")
    for tau in (0.3, 1.0, 2.0):
        x = integrate(sys, [0.0], [0.0], ramp(), FlowConfig(tau, 100))
        assert abs(x[0] - (tau - 1 + math.exp(-tau))) <= 1e-7


def test_trace_matches_closed_form_and_endpoint():
    sys = scalar("-x1 + d1")
    cfg = FlowConfig(1.0, 64)
    tr = integrate_trace(sys, [0.0], [0.0], ramp(), cfg, 8)
    t = np.arange(1, 9) / 8
    np.testing.assert_allclose(tr[:, 0], t - 1 + np.exp(-t), atol=1e-6)
    assert np.array_equal(tr[-1], integrate(sys, [0.0], [0.0], ramp(), cfg))


def test_trace_single_sample_is_endpoint(pendulum):
    cfg = FlowConfig(1.0)
    x0, u, d = [0.2, -0.1], [0.5], constant_disturbance([0.01])
    assert np.array_equal(integrate_trace(pendulum, x0, u, d, cfg, 1)[0], integrate(pendulum, x0, u, d, cfg))
    eq = integrate_trace(pendulum, [0.0, 0.0], [0.0], constant_disturbance([0.0]), cfg, 4)
    assert np.all(eq == 0.0)
    with pytest.raises(InvalidInputError):
        integrate_trace(pendulum, x0, u, d, cfg, 5)


def test_fourth_order_convergence(pendulum):
    x0, u = np.array([0.6, -0.4]), np.array([1.2])
    d = DisturbanceSignal(lambda t: (0.01 * np.cos(2 * np.asarray(t)))[:, None], 0.02, 1)
    ref = integrate(pendulum, x0, u, d, FlowConfig(1.0, 4096))
    e1 = np.max(np.abs(integrate(pendulum, x0, u, d, FlowConfig(1.0, 8)) - ref))
    e2 = np.max(np.abs(integrate(pendulum, x0, u, d, FlowConfig(1.0, 16)) - ref))
    assert 12 <= e1 / e2 <= 20


def test_time_additivity(pendulum):
    x0, u = np.array([0.3, 0.2]), np.array([-0.7])
    d = DisturbanceSignal(lambda t: (0.015 * np.sin(0.1 * np.asarray(t)))[:, None], 0.0015, 1)
    whole = integrate(pendulum, x0, u, d, FlowConfig(1.0, 64))
    half = FlowConfig(0.5, 32)
    mid = integrate(pendulum, x0, u, d, half)
    split = integrate(pendulum, mid, u, d.shifted(0.5), half)
    assert np.max(np.abs(whole - split)) <= 1e-8


def test_batched_matches_single(pendulum):
    rng = np.random.default_rng(3)
    X = pendulum.state_box.sample(rng, 20)
    U = pendulum.control_box.sample(rng, 20)
    d = constant_disturbance([0.005])
    batch = integrate(pendulum, X, U, d, FlowConfig(1.0))
    for i in range(20):
        np.testing.assert_allclose(batch[i], integrate(pendulum, X[i], U[i], d, FlowConfig(1.0)), rtol=0, atol=1e-14)


def _decay_violation(cert, sys, rng, tau, count=2000):
    """max of V(end1, end2) - exp(-lam tau) V(x1, x2) with shared u and d."""
    x1, x2 = sys.state_box.sample(rng, count), sys.state_box.sample(rng, count)
    u = sys.control_box.sample(rng, count)
    d = sys.disturbance_box.sample(rng, count)
    sig = DisturbanceSignal(lambda t, d=d: d, 0.0, 1)
    e1 = integrate(sys, x1, u, sig, FlowConfig(tau))
    e2 = integrate(sys, x2, u, sig, FlowConfig(tau))
    return float(np.max(cert.V(e1, e2) - math.exp(-cert.lam * tau) * cert.V(x1, x2)))


def test_incremental_decay_with_sound_certificate(pendulum, contraction):
    rng = np.random.default_rng(11)
    for tau in (0.1, 0.5, 1.0):
        assert _decay_violation(contraction, pendulum, rng, tau) <= 1e-6


def test_incremental_decay_fails_for_published_matrix(pendulum):
    # the published quadratic form does not contract at rate 0.77 even with shared inputs
    rng = np.random.default_rng(11)
    worst = max(_decay_violation(pendulum_cert(), pendulum, rng, tau) for tau in (0.1, 0.5, 1.0))
    assert worst > 0.05


def test_blow_up_detected():
    sys = scalar("x1^2")
    with pytest.raises(BlowUpError):
        integrate(sys, [10.0], [0.0], constant_disturbance([0.0]), FlowConfig(1.0))


def test_invalid_config():
    with pytest.raises(InvalidInputError):
        FlowConfig(0.0)
    with pytest.raises(InvalidInputError):
        FlowConfig(1.0, 0)
