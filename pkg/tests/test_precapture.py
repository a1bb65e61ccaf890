import math

import numpy as np
import pytest

from src.analysis.precapture import (decay_curve, fit_linear_tidal, max_omega_deviation, solve_Omega,
                                     thetadot_approx, time_to_capture, time_to_reach)
from src.dynamics.integrator import IntegratorConfig
from src.dynamics.model import tidal_F
from src.dynamics.params import SpinState
from src.exceptions import KinkProximity, Unreachable


@pytest.fixture
def fit_195(params):
    return fit_linear_tidal(1.95 * params.n, params)


def test_linear_fit_at_1_95(fit_195):
    assert fit_195.a == pytest.approx(1.423e-5, rel=5e-3)
    assert fit_195.b == pytest.approx(1.894e-7, rel=5e-3)


def test_linear_fit_is_tangent(params, fit_195):
    x = fit_195.operating_point
    assert fit_195(x) == pytest.approx(params.eta * tidal_F(x, params), rel=1e-12)
    h = 1e-4
    slope = (params.eta * tidal_F(x + h, params) - params.eta * tidal_F(x - h, params)) / (2 * h)
    assert -fit_195.b == pytest.approx(slope, rel=1e-5)


def test_linear_fit_scales_with_lambda(params, fit_195):
    doubled = fit_linear_tidal(1.95 * params.n, params.replace(lam=2.0))
    assert doubled.b == pytest.approx(2 * fit_195.b, rel=1e-14)


@pytest.mark.parametrize("ratio", [1.5, 1.51, 2.0, 0.49])
def test_kink_proximity(params, ratio):
    with pytest.raises(KinkProximity):
        fit_linear_tidal(ratio * params.n, params)


@pytest.mark.parametrize("ratio, op, expected", [
    (1.95, 1.95, 2.08e6),
    (3.25, 3.25, 8.38e6),
])
def test_time_to_capture(params, ratio, op, expected):
    fit = fit_linear_tidal(op * params.n, params)
    assert time_to_capture(ratio * params.n, 1.5 * params.n, fit) == pytest.approx(expected, rel=1e-2)


def test_R_values(params, fit_195):
    sol = solve_Omega(0.0, 1.95 * params.n, fit_195, params)
    assert sol.R == pytest.approx(-24.26, rel=2e-3)


def test_time_to_capture_is_monotone(params, fit_195):
    start = 1.95 * params.n
    times = [time_to_capture(start, r * params.n, fit_195) for r in (1.9, 1.8, 1.7, 1.6, 1.5)]
    assert all(t1 < t2 for t1, t2 in zip(times, times[1:]))
    assert time_to_capture(start, start, fit_195) == 0.0


def test_unreachable(params, fit_195):
    with pytest.raises(Unreachable):
        time_to_capture(1.95 * params.n, 2.0 * params.n, fit_195)
    # above the asymptote a/b the linear torque spins the body up
    with pytest.raises(Unreachable):
        time_to_capture(1.01 * fit_195.asymptote, 1.5 * params.n, fit_195)


def test_Omega_shift_is_common(params, fit_195):
    sol = solve_Omega(0.7, 1.95 * params.n, fit_195, params)
    shifts = {k: sol.Omega[k] - (1.95 * params.n - k * params.n) for k in sol.Omega}
    assert max(shifts.values()) == pytest.approx(min(shifts.values()), abs=1e-12)
    assert sol.max_deviation == pytest.approx(abs(sol.shift))
    # the fixed point equation holds
    total = sum(a_k / sol.Omega[k] for k, a_k in sol.coefficients.items())
    assert sol.shift == pytest.approx(-params.zeta * math.cos(1.4) * total, abs=1e-9)


def test_Omega_without_triaxiality(free_params):
    params = free_params.replace(eta=0.03096)
    fit = fit_linear_tidal(1.95 * params.n, params)
    sol = solve_Omega(0.3, 1.95 * params.n, fit, params)
    assert sol.shift == 0.0
    t = np.linspace(0.0, 5e6, 11)
    np.testing.assert_allclose(thetadot_approx(t, sol, fit, params),
                               fit.asymptote + np.exp(fit.b * t) * sol.R, rtol=1e-14)


def test_approximation_starts_at_initial_spin(params, fit_195):
    sol = solve_Omega(1.1, 1.95 * params.n, fit_195, params)
    assert thetadot_approx(0.0, sol, fit_195, params) == pytest.approx(1.95 * params.n, rel=1e-13)


@pytest.mark.parametrize("ratio, expected", [(1.95, 0.073), (3.25, 0.010)])
def test_max_omega_deviation(params, ratio, expected):
    fit = fit_linear_tidal(ratio * params.n, params)
    assert max_omega_deviation(ratio * params.n, fit, params) == pytest.approx(expected, rel=0.1)


def test_decay_curve(params, fit_195):
    sol = solve_Omega(0.0, 1.95 * params.n, fit_195, params)
    curve = decay_curve(sol, fit_195, 2e6, samples=101, params=params)
    assert list(curve.columns) == ['t', 'theta_dot_approx']
    assert len(curve) == 101
    assert curve['theta_dot_approx'].iloc[-1] < curve['theta_dot_approx'].iloc[0]


@pytest.mark.slow
@pytest.mark.parametrize("ratio, expected", [(1.95, 2.14e6), (3.25, 8.38e6)])
def test_full_model_first_passage(params, ratio, expected):
    t_hit = time_to_reach(SpinState(0.0, ratio * params.n, 0.0), 1.5 * params.n, 3e7, params,
                          IntegratorConfig.survey())
    assert t_hit == pytest.approx(expected, rel=2e-2)


@pytest.mark.slow
def test_triaxial_torque_barely_changes_decay(params):
    start = SpinState(1.7, 1.75 * params.n, 0.0)
    config = IntegratorConfig.survey()
    with_triaxial = time_to_reach(start, 1.5 * params.n, 3e6, params, config)
    without = time_to_reach(start, 1.5 * params.n, 3e6, params.replace(zeta=0.0), config)
    assert without == pytest.approx(1.10e6, rel=5e-2)
    assert with_triaxial == pytest.approx(without, rel=1e-1)
