"""
Bifurcation scans of the 3:2 attractor in S or lambda, and the Hopf amplitude fit.
"""
import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from scipy.optimize import curve_fit

from ..dynamics import config as C
from ..dynamics.integrator import IntegratorConfig, StroboscopicSampling, integrate, stroboscopic_map
from ..dynamics.params import PhysicalParams, SpinState, DEFAULT_PARAMS, fold_libration
from ..exceptions import FitFailed

logger = logging.getLogger(__name__)

SCAN_PARAMETERS = ('S', 'lambda')
OMEGA0 = 1.5


@dataclass
class BifurcationPoint:
    """Stroboscopic record of one scan value, after the transient."""
    parameter: str
    value: float
    thetadot_offsets: np.ndarray   # theta_dot(k T0)/n - 3/2
    librations: np.ndarray         # z(k T0) = theta - 3/2 n t, folded
    omega_L: float

    @property
    def amplitude(self) -> float:
        return 0.5 * float(np.ptp(self.thetadot_offsets))


def _scan_params(parameter: str, value: float, params: PhysicalParams) -> PhysicalParams:
    if parameter == 'S':
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"S must lie in [0, 1], got {value}")
        return params.replace(S=value)
    if parameter == 'lambda':
        if value < 1.0:
            raise ValueError(f"lambda must be >= 1, got {value}")
        return params.replace(lam=value)
    raise ValueError(f"Unknown scan parameter '{parameter}', expected one of {SCAN_PARAMETERS}")


def rotation_frequency(z: np.ndarray, zdot_over_n: np.ndarray, period: float) -> float:
    """
    Slow frequency from the rotation of stroboscopic points about their centroid.

    Returns nan for a point cluster with no measurable rotation.
    """
    z = np.asarray(z, dtype=float)
    zd = np.asarray(zdot_over_n, dtype=float)
    if len(z) < 3:
        return math.nan
    dz, dzd = z - z.mean(), zd - zd.mean()
    # scale both axes to unit spread so the angle advances evenly on an ellipse
    sz, szd = np.std(dz), np.std(dzd)
    if sz < 1e-12 or szd < 1e-12:
        return math.nan
    angles = np.unwrap(np.arctan2(dzd / szd, dz / sz))
    return float(abs(np.mean(np.diff(angles))) / period)


def _scan_point(parameter: str, value: float, params: PhysicalParams, config: IntegratorConfig,
                transient: int, record: int, start: SpinState) -> BifurcationPoint:
    local = _scan_params(parameter, value, params)
    state = stroboscopic_map(start, transient, config, local) if transient > 0 else start
    traj = integrate(state, state.t + record * local.period, config, local, StroboscopicSampling())
    offsets = traj.theta_dot[1:] / local.n - OMEGA0
    z = fold_libration(traj.theta[1:] - OMEGA0 * local.n * traj.t[1:])
    omega_L = rotation_frequency(z, offsets, local.period)
    logger.debug("%s=%.4g: amplitude %.3g", parameter, value, 0.5 * np.ptp(offsets))
    return BifurcationPoint(parameter=parameter, value=float(value), thetadot_offsets=offsets,
                            librations=z, omega_L=omega_L)


def bifurcation_scan(parameter: str, values: Sequence[float], params: PhysicalParams = DEFAULT_PARAMS,
                     config: Optional[IntegratorConfig] = None, transient: int = C.SCAN_TRANSIENT_PERIODS,
                     record: int = C.SCAN_RECORD_PERIODS, jobs: int = 1,
                     start: Optional[SpinState] = None) -> List[BifurcationPoint]:
    """
    For each parameter value, discards `transient` periods and records `record` values of theta_dot(k T0)/n - 3/2.

    :param parameter: 'S' or 'lambda'.
    :param start: Initial state; defaults to exact 3:2 at libration angle zero.
    """
    if parameter not in SCAN_PARAMETERS:
        raise ValueError(f"Unknown scan parameter '{parameter}', expected one of {SCAN_PARAMETERS}")
    config = config or IntegratorConfig.survey()
    start = start or SpinState(math.pi, OMEGA0 * params.n, 0.0)
    logger.info("Scanning %s over %d values (transient %d T0, record %d)", parameter, len(values), transient, record)
    return Parallel(n_jobs=jobs)(
        delayed(_scan_point)(parameter, float(v), params, config, transient, record, start) for v in values)


def bifurcation_frame(points: List[BifurcationPoint]) -> pd.DataFrame:
    """Long-form table param, value_index, thetadot_over_n_minus_1_5."""
    frames = [pd.DataFrame({'param': pt.value,
                            'value_index': np.arange(len(pt.thetadot_offsets)),
                            'thetadot_over_n_minus_1_5': pt.thetadot_offsets}) for pt in points]
    if not frames:
        return pd.DataFrame(columns=['param', 'value_index', 'thetadot_over_n_minus_1_5'])
    return pd.concat(frames, ignore_index=True)


def _hopf_law(s, A0, S0, kappa):
    return A0 * np.power(np.clip(s - S0, 0.0, None), kappa)


@dataclass
class HopfFit:
    A0: float
    S0: float
    kappa: float
    points_used: int

    def to_dict(self):
        return {'A0': self.A0, 'S0': self.S0, 'kappa': self.kappa, 'points_used': self.points_used}


def fit_hopf(values: Sequence[float], amplitudes: Sequence[float], noise_floor: float = 1e-7,
             max_points: int = 12) -> HopfFit:
    """
    Least-squares fit of A = A0 (S - S0)^kappa to the leftmost amplitudes above `noise_floor`.

    :raises FitFailed: With fewer than four points above the floor, or when the solver fails.
    """
    values = np.asarray(values, dtype=float)
    amplitudes = np.asarray(amplitudes, dtype=float)
    order = np.argsort(values)
    values, amplitudes = values[order], amplitudes[order]
    above = np.flatnonzero(amplitudes > noise_floor)
    if above.size < 4:
        raise FitFailed(f"Need at least 4 amplitudes above {noise_floor}, got {above.size}")
    first = above[0]
    sel = slice(first, min(first + max_points, len(values)))
    s, a = values[sel], amplitudes[sel]
    last_below = values[first - 1] if first > 0 else s[0] - (s[1] - s[0])
    guess_S0 = 0.5 * (last_below + s[0])
    # fit in units of the largest amplitude
    scale = float(a.max())
    guess_A0 = 1.0 / math.sqrt(max(s[-1] - guess_S0, 1e-12))
    try:
        popt, _ = curve_fit(_hopf_law, s, a / scale, p0=(guess_A0, guess_S0, 0.5),
                            bounds=([0.0, last_below - (s[-1] - s[0]), 0.05], [np.inf, s[0], 2.0]), x_scale='jac')
    except RuntimeError as e:
        raise FitFailed(f"Hopf fit did not converge: {e}") from e
    fit = HopfFit(A0=float(popt[0]) * scale, S0=float(popt[1]), kappa=float(popt[2]), points_used=len(s))
    logger.info("Hopf fit: A0=%.4g S0=%.4g kappa=%.4f over %d points", fit.A0, fit.S0, fit.kappa, fit.points_used)
    return fit
