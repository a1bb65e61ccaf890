import math

import numpy as np
import pytest

from src.analysis.bifurcation import (BifurcationPoint, bifurcation_frame, bifurcation_scan, fit_hopf,
                                      rotation_frequency)
from src.exceptions import FitFailed


def _hopf_amplitudes(values, A0=7.976e-5, S0=0.134, kappa=0.5):
    return A0 * np.power(np.clip(values - S0, 0.0, None), kappa)


def test_fit_recovers_hopf_law():
    values = np.round(np.arange(0.10, 0.2501, 0.005), 3)
    fit = fit_hopf(values, _hopf_amplitudes(values))
    assert fit.S0 == pytest.approx(0.134, abs=1e-3)
    assert fit.kappa == pytest.approx(0.5, abs=2e-2)
    assert fit.A0 == pytest.approx(7.976e-5, rel=5e-2)
    assert fit.points_used == 12
    assert set(fit.to_dict()) == {'A0', 'S0', 'kappa', 'points_used'}


def test_fit_moves_away_from_initial_guess():
    values = np.round(np.arange(0.10, 0.2501, 0.005), 3)
    fit = fit_hopf(values, _hopf_amplitudes(values, A0=2e-4, kappa=0.8))
    assert fit.kappa == pytest.approx(0.8, abs=2e-2)
    assert fit.S0 == pytest.approx(0.134, abs=1e-3)
    assert fit.A0 == pytest.approx(2e-4, rel=5e-2)


def test_fit_ignores_order_of_values():
    values = np.round(np.arange(0.10, 0.2501, 0.005), 3)
    amplitudes = _hopf_amplitudes(values)
    shuffled = np.random.default_rng(3).permutation(len(values))
    fit = fit_hopf(values[shuffled], amplitudes[shuffled])
    assert fit.S0 == pytest.approx(0.134, abs=1e-3)


def test_fit_needs_four_points():
    values = np.array([0.10, 0.11, 0.12, 0.13, 0.14])
    amplitudes = np.array([0.0, 0.0, 1e-6, 2e-6, 3e-6])
    with pytest.raises(FitFailed):
        fit_hopf(values, amplitudes)


def test_rotation_frequency_on_ellipse(params):
    step = 2 * math.pi / 74
    k = np.arange(3 * 74 + 1)
    z = 1e-2 * np.cos(step * k)
    zdot_over_n = 2e-4 * np.sin(step * k)
    assert rotation_frequency(z, zdot_over_n, params.period) == pytest.approx(step / params.period, rel=1e-9)


def test_rotation_frequency_of_fixed_point(params):
    assert math.isnan(rotation_frequency(np.full(20, 0.1), np.full(20, 1e-5), params.period))
    assert math.isnan(rotation_frequency(np.array([0.1, 0.2]), np.array([0.0, 1.0]), params.period))


def test_bifurcation_frame_layout():
    points = [BifurcationPoint('S', s, np.array([1e-6, -1e-6, 0.0]), np.zeros(3), math.nan) for s in (0.1, 0.2)]
    frame = bifurcation_frame(points)
    assert list(frame.columns) == ['param', 'value_index', 'thetadot_over_n_minus_1_5']
    assert len(frame) == 6
    assert list(frame['value_index'][:3]) == [0, 1, 2]
    assert points[0].amplitude == pytest.approx(1e-6)
    assert bifurcation_frame([]).empty


@pytest.mark.parametrize("parameter, value", [('S', 1.2), ('S', -0.1), ('lambda', 0.5), ('eta', 1.0)])
def test_scan_rejects_bad_values(params, parameter, value):
    with pytest.raises(ValueError):
        bifurcation_scan(parameter, [value], params, transient=1, record=3)


def test_short_scan_runs(params):
    points = bifurcation_scan('S', [0.2], params, transient=2, record=5)
    assert len(points) == 1
    assert points[0].thetadot_offsets.shape == (5,)
    assert np.all(np.abs(points[0].thetadot_offsets) < 0.05)


@pytest.mark.slow
def test_hopf_transition_in_S(params):
    values = np.round(np.arange(0.10, 0.2501, 0.005), 3)
    points = bifurcation_scan('S', values, params, jobs=-1)
    amplitudes = [pt.amplitude for pt in points]
    assert max(a for v, a in zip(values, amplitudes) if v < 0.13) < 1e-7
    fit = fit_hopf(values, amplitudes)
    assert fit.S0 == pytest.approx(0.134, abs=5e-3)
    assert 0.45 <= fit.kappa <= 0.55
