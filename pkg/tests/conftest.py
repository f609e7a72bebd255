"""Shared fixtures: the pendulum, its certificates, and two desk-scale models."""

import numpy as np
import pytest

from symctl import (
    FlowConfig,
    ParameterVector,
    build_model,
    pendulum_contraction_cert,
    pendulum_preset,
    pendulum_spec,
    suggest_params,
    synthesize,
)

COARSE_EPS = 1.5


@pytest.fixture(scope="session")
def pendulum():
    return pendulum_preset()


@pytest.fixture(scope="session")
def contraction(pendulum):
    from symctl.lyapunov import with_gamma

    return with_gamma(pendulum_contraction_cert(), pendulum.state_box, "dual")


@pytest.fixture(scope="session")
def coarse_params(pendulum, contraction):
    return suggest_params(contraction, pendulum, COARSE_EPS, 1.0)


@pytest.fixture(scope="session")
def coarse_model(pendulum, coarse_params):
    return build_model(pendulum, coarse_params, FlowConfig(1.0))


@pytest.fixture(scope="session")
def coarse_graph(coarse_model):
    return coarse_model.to_game()


@pytest.fixture(scope="session")
def coarse_result(coarse_model, coarse_graph):
    return synthesize(coarse_model, pendulum_spec(1.0), graph=coarse_graph)


# a few hundred states; builds in well under a second
TINY = dict(tau=1.0, mu_x=0.04, mu_u=0.25, mu_d=0.00095, N=0, theta_d=0.05)


@pytest.fixture(scope="session")
def tiny_params():
    return ParameterVector(**TINY)


@pytest.fixture(scope="session")
def tiny_model(pendulum, tiny_params):
    return build_model(pendulum, tiny_params, FlowConfig(1.0))


def lipschitz_signal(rng, lo, hi, kappa, tau, knots=12):
    """Random piecewise-linear signal on ``[0, tau]``, slopes within ``kappa``, clipped to ``[lo, hi]``.

    Clipping is 1-Lipschitz per component, so the bound survives it.
    """
    lo = np.atleast_1d(np.asarray(lo, float))
    hi = np.atleast_1d(np.asarray(hi, float))
    ts = np.sort(np.concatenate([[0.0, tau], rng.uniform(0, tau, knots)]))
    dt = np.diff(ts)
    start = rng.uniform(lo, hi)
    slopes = rng.uniform(-kappa, kappa, size=(dt.size, lo.size))
    # occasionally pin the slope at the bound
    pin = rng.random(slopes.shape) < 0.2
    slopes = np.where(pin, np.sign(slopes) * kappa, slopes)
    vals = np.vstack([start, start + np.cumsum(slopes * dt[:, None], axis=0)])
    vals = np.clip(vals, lo, hi)

    def d(t):
        t = np.asarray(t, float)
        out = np.stack([np.interp(t, ts, vals[:, j]) for j in range(lo.size)], axis=-1)
        return out

    return d
