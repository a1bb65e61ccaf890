"""Spectral estimate of the slow libration frequency omega_L from a uniformly sampled trajectory."""
import logging
import math
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy.signal import find_peaks
from scipy.signal.windows import hann

from ..dynamics import config as C
from ..dynamics.integrator import Trajectory
from ..dynamics.params import PhysicalParams, DEFAULT_PARAMS
from ..exceptions import PeakNotFound

logger = logging.getLogger(__name__)


@dataclass
class Spectrum:
    """Hann-windowed FFT magnitude of theta_dot; frequencies in rad/yr."""
    freq: np.ndarray
    magnitude: np.ndarray
    peaks: np.ndarray
    omega_L: float

    @property
    def nyquist(self) -> float:
        return float(self.freq[-1])

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({'freq': self.freq, 'magnitude': self.magnitude})


def _uniform_step(t: np.ndarray) -> float:
    steps = np.diff(t)
    dt = float(np.median(steps))
    if not np.allclose(steps, dt, rtol=1e-6, atol=1e-9 * dt):
        raise ValueError("Spectrum needs uniformly spaced samples")
    return dt


def _refine_peak(log_mag: np.ndarray, i: int) -> float:
    """Vertex offset of the parabola through three log-magnitude bins."""
    left, mid, right = log_mag[i - 1], log_mag[i], log_mag[i + 1]
    denom = left - 2.0 * mid + right
    if denom == 0.0:
        return 0.0
    return 0.5 * (left - right) / denom


def power_spectrum(signal: np.ndarray, dt: float):
    """Mean-removed, Hann-windowed rfft magnitude and angular frequency grid."""
    signal = np.asarray(signal, dtype=float)
    window = hann(len(signal), sym=False)
    magnitude = np.abs(np.fft.rfft((signal - signal.mean()) * window))
    freq = 2.0 * math.pi * np.fft.rfftfreq(len(signal), d=dt)
    return freq, magnitude


def dominant_slow_peak(freq: np.ndarray, magnitude: np.ndarray, ceiling: float,
                       factor: float = C.PEAK_MEDIAN_FACTOR):
    """
    Largest local maximum of `magnitude` below `ceiling` that exceeds `factor` times the median.

    :return: (refined frequency, indices of all qualifying peaks).
    :raises PeakNotFound: When no qualifying peak exists.
    """
    threshold = factor * float(np.median(magnitude))
    peaks, props = find_peaks(magnitude, height=threshold)
    slow = peaks[(freq[peaks] < ceiling) & (peaks > 0)]
    if slow.size == 0:
        raise PeakNotFound(f"No spectral peak below {ceiling:.4g} rad/yr above {factor}x median")
    best = slow[np.argmax(magnitude[slow])]
    log_mag = np.log(np.maximum(magnitude, np.finfo(float).tiny))
    offset = _refine_peak(log_mag, best) if 0 < best < len(magnitude) - 1 else 0.0
    df = freq[1] - freq[0]
    return float(freq[best] + offset * df), peaks


def extract_frequency(traj: Trajectory, params: PhysicalParams = DEFAULT_PARAMS,
                      min_samples: int = C.MIN_SPECTRUM_SAMPLES) -> Spectrum:
    """
    omega_L as the dominant peak of the theta_dot spectrum below n/2.

    :param traj: Uniformly sampled trajectory, at least 2^18 samples with dt <= T0/16.
    :raises PeakNotFound: When no peak below n/2 clears 5x the median magnitude.
    """
    if len(traj) < min_samples:
        raise ValueError(f"Spectrum needs at least {min_samples} samples, got {len(traj)}")
    # the trailing end point of a uniform run may be off-grid
    t, theta_dot = traj.t, traj.theta_dot
    if len(t) > 2 and not math.isclose(t[-1] - t[-2], t[1] - t[0], rel_tol=1e-6):
        t, theta_dot = t[:-1], theta_dot[:-1]
    dt = _uniform_step(t)
    if dt > params.period / 16 * (1 + 1e-9):
        raise ValueError(f"Sampling step {dt:.4g} yr exceeds T0/16")
    freq, magnitude = power_spectrum(theta_dot, dt)
    omega_L, peaks = dominant_slow_peak(freq, magnitude, 0.5 * params.n)
    logger.info("Spectral omega_L = %.6g rad/yr (T1 = %.4f T0)", omega_L, params.n / omega_L)
    return Spectrum(freq=freq, magnitude=magnitude, peaks=peaks, omega_L=omega_L)
