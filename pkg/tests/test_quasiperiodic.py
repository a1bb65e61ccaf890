import math

import numpy as np
import pytest

from src.analysis.quasiperiodic import (I1, I2, I2_time_average, attractor_distance, find_amplitude_root,
                                        normal_form, phi_torque, qp_waveform, second_order_averages,
                                        solve_construction)
from src.dynamics.integrator import IntegratorConfig, StroboscopicSampling, integrate, stroboscopic_map
from src.dynamics.model import tidal_F
from src.dynamics.params import DEFAULT_PARAMS, SpinState
from src.exceptions import NoRoot


@pytest.fixture(scope='module')
def construction():
    return solve_construction(DEFAULT_PARAMS)


def test_normal_form_constants(params):
    nf = normal_form(params)
    assert nf.omega == pytest.approx(0.3534, abs=1e-4)
    assert nf.two_eps_B_over_omega == pytest.approx(-8.819e-3, rel=2e-3)
    assert nf.rho == pytest.approx(5.242e-5, rel=2e-3)
    assert nf.beta_sup == pytest.approx(1.644e-4, rel=1e-2)
    assert set(nf.sidebands) == {-5, -4, -3, -2, -1, 1, 2, 3, 4, 5}


def test_phi_at_zero_is_F_at_3_2(params):
    assert phi_torque(0.0, params) == pytest.approx(tidal_F(1.5 * params.n, params), rel=1e-15)


def test_sidebands_scale_with_S(params):
    nf = normal_form(params.replace(S=0.0))
    assert nf.B == 0.0
    assert nf.beta_sup == 0.0
    assert nf.omega == pytest.approx(normal_form(params).omega)


def test_I1_is_odd(params):
    assert I1(-0.004, params) == pytest.approx(-I1(0.004, params), rel=1e-8)


def test_I2_vanishes_at_zero_and_is_odd(params):
    nf = normal_form(params)
    assert I2(0.0, params, nf) == pytest.approx(0.0, abs=1e-14)
    assert I2(-2e-3, params, nf) == pytest.approx(-I2(2e-3, params, nf), rel=1e-9)


def test_I2_changes_sign_across_root(params, construction):
    nf = normal_form(params)
    a = construction.a_root
    assert I2(0.8 * a, params, nf) * I2(1.25 * a, params, nf) < 0.0


def test_I2_negative_below_root(params):
    nf = normal_form(params)
    assert I2(4.2e-4, params, nf) < 0.0
    assert I2(1e-3, params, nf) == pytest.approx(-8.84e-6, rel=5e-2)
    assert I2(0.9 * 3.174e-3, params, nf) < 0.0


def test_I2_converged_in_tolerance(params):
    nf = normal_form(params)
    assert I2(2e-3, params, nf, tol=1e-11) == pytest.approx(I2(2e-3, params, nf, tol=1e-14), rel=1e-4, abs=1e-11)


def test_time_average_agrees_with_torus_average(params, construction):
    nf = normal_form(params)
    a = 2.0 * construction.a_root
    # the k = 3 spike is ~1e-3 wide in time; 256 samples per orbit resolve it
    assert I2_time_average(a, params, nf, samples_per_fast_period=256) == pytest.approx(I2(a, params, nf), rel=5e-2)


def test_no_root_raises(params):
    with pytest.raises(NoRoot):
        find_amplitude_root(params, bracket=(1e-5, 1e-4))


def test_construction_constants(construction):
    assert construction.a_root == pytest.approx(3.174e-3, rel=1e-2)
    assert construction.C1 == pytest.approx(1.780e-2, rel=1e-2)
    assert construction.alpha == pytest.approx(8.981e-3, rel=1e-2)
    assert construction.D == pytest.approx(4.988e-4, rel=1e-2)
    assert construction.mu == pytest.approx(1.084e-4, rel=2e-2)
    assert construction.mu_eps == pytest.approx(1.034e-5, rel=2e-2)
    assert abs(construction.alpha) < 0.05


def test_construction_relations(construction):
    assert construction.alpha == pytest.approx(construction.a_root / construction.omega, rel=1e-12)
    assert construction.omega ** 2 - construction.omega_L ** 2 == pytest.approx(construction.mu_eps, abs=1e-8)
    assert construction.omega_L < construction.omega
    assert construction.C1_trivial == pytest.approx(-construction.two_eps_B_over_omega)
    assert not construction.trivial_root_physical


def test_construction_record(construction):
    record = construction.to_dict()
    assert record['slow_amplitude'] == pytest.approx(construction.alpha / 2)
    assert record['omega_minus_omega_L'] > 0.0
    assert all(isinstance(k, str) for k in record['beta_harmonics'])


def test_waveform_shapes_and_slow_part(params, construction):
    t = np.linspace(0.0, 40.0, 101)
    z, zdot_over_n = qp_waveform(construction, t, params)
    assert z.shape == t.shape and zdot_over_n.shape == t.shape
    # the fast part is periodic in T0, so stroboscopic samples keep only the slow ellipse
    k = np.arange(50)
    zs, zds = qp_waveform(construction, k * params.period, params)
    z0, _ = qp_waveform(construction, 0.0, params)
    np.testing.assert_allclose(zs - z0, construction.slow_amplitude * np.sin(construction.omega * k * params.period),
                               atol=1e-12)
    np.testing.assert_allclose(zds, construction.slow_amplitude * construction.omega
                               * np.cos(construction.omega * k * params.period) / params.n, atol=1e-12)


def test_second_order_averages(params, construction):
    averages = second_order_averages(construction, params)
    assert set(averages) == {f'I_2{c}{i}' for c in 'cs' for i in range(1, 5)}
    for name in ('I_2s2', 'I_2c1', 'I_2c3', 'I_2c4'):
        assert averages[name] == pytest.approx(0.0, abs=1e-12), name
    alpha = construction.alpha
    # a* is the root of I2, so the tidal cos projection balances
    assert averages['I_2c2'] == pytest.approx(0.0, abs=1e-10)
    assert averages['I_2s3'] == pytest.approx(-construction.mu * alpha / 2, rel=1e-9)
    assert averages['I_2s4'] == pytest.approx(params.coefficient(3) * alpha ** 3 / 8, rel=2e-2)


def test_attractor_distance_of_analytic_points(params, construction):
    k = np.arange(2000)
    z, zdot_over_n = qp_waveform(construction, k * params.period, params)
    distance, diameter = attractor_distance(construction, z, zdot_over_n, params)
    assert diameter == pytest.approx(construction.alpha, rel=1e-3)
    assert distance < 2e-2 * diameter


def test_attractor_distance_detects_offset(params, construction):
    k = np.arange(400)
    z, zdot_over_n = qp_waveform(construction, k * params.period, params)
    distance, diameter = attractor_distance(construction, z + 0.5 * construction.alpha, zdot_over_n, params)
    assert distance > 0.3 * diameter


@pytest.mark.slow
def test_analytic_curve_matches_numerical_attractor(params, construction):
    n, period = params.n, params.period
    z0, zdot0 = qp_waveform(construction, 0.0, params)
    config = IntegratorConfig()
    state = stroboscopic_map(SpinState(math.pi + float(z0), (1.5 + float(zdot0)) * n, 0.0), 5_000, config, params)
    traj = integrate(state, state.t + 3_000 * period, config, params, StroboscopicSampling())
    z = traj.librations(1.5, n)
    distance, diameter = attractor_distance(construction, z, traj.theta_dot / n - 1.5, params)
    assert distance < 0.15 * diameter
