import math

import numpy as np
import pytest

from src.analysis.spectrum import _refine_peak, dominant_slow_peak, extract_frequency, power_spectrum
from src.dynamics.integrator import IntegratorConfig, Trajectory, UniformSampling, integrate, stroboscopic_map
from src.dynamics.params import SpinState
from src.exceptions import PeakNotFound

OMEGA_L = 0.3530


def _synthetic(params, count=2 ** 18, extra_end=False):
    dt = params.period / 16
    t = dt * np.arange(count)
    signal = np.sin(OMEGA_L * t) + 0.1 * np.sin(params.n * t)
    if extra_end:
        t = np.append(t, t[-1] + 0.3 * dt)
        signal = np.append(signal, 0.0)
    return Trajectory(t=t, theta=np.zeros_like(t), theta_dot=signal)


def test_synthetic_slow_frequency(params):
    traj = _synthetic(params)
    spectrum = extract_frequency(traj, params)
    resolution = 2 * math.pi / (traj.t[-1] - traj.t[0])
    assert spectrum.omega_L == pytest.approx(OMEGA_L, abs=0.5 * resolution)
    assert spectrum.nyquist == pytest.approx(math.pi / (params.period / 16), rel=1e-9)
    assert list(spectrum.to_frame().columns) == ['freq', 'magnitude']


def test_off_grid_end_point_is_dropped(params):
    spectrum = extract_frequency(_synthetic(params, extra_end=True), params)
    assert spectrum.omega_L == pytest.approx(OMEGA_L, rel=1e-2)


def test_too_few_samples(params):
    with pytest.raises(ValueError):
        extract_frequency(_synthetic(params, count=1024), params)


def test_coarse_sampling_rejected(params):
    traj = _synthetic(params)
    traj.t = traj.t * 2.0
    with pytest.raises(ValueError):
        extract_frequency(traj, params)


def test_power_spectrum_grid():
    freq, magnitude = power_spectrum(np.ones(64), 0.5)
    assert len(freq) == 33
    assert freq[1] == pytest.approx(2 * math.pi / 32.0)
    np.testing.assert_allclose(magnitude, 0.0, atol=1e-12)


def test_refine_peak_parabola_vertex():
    assert _refine_peak(np.array([-1.0, 0.0, -1.0]), 1) == 0.0
    # parabola y = -(x - 0.25)^2 sampled at -1, 0, 1
    values = -(np.array([-1.0, 0.0, 1.0]) - 0.25) ** 2
    assert _refine_peak(values, 1) == pytest.approx(0.25)


def test_no_peak_below_ceiling():
    freq = np.arange(100.0)
    with pytest.raises(PeakNotFound):
        dominant_slow_peak(freq, np.ones(100), 50.0)
    magnitude = np.full(100, 1e-3)
    magnitude[60] = 1.0
    with pytest.raises(PeakNotFound):
        dominant_slow_peak(freq, magnitude, 50.0)


@pytest.mark.slow
def test_numerical_3_2_attractor(params):
    config = IntegratorConfig()
    state = stroboscopic_map(SpinState(math.pi, 1.5 * params.n, 0.0), 5_000, config, params)
    traj = integrate(state, state.t + 200_000 * params.period, config, params, UniformSampling(params.period / 16))
    spectrum = extract_frequency(traj, params)
    assert spectrum.omega_L == pytest.approx(params.n / 73.9034, rel=5e-3)
