"""
Adaptive Dormand-Prince 5(4) integration of the spin equation.

The compiled core keeps time as (period index N, phase s in [0, T0]) and the angle as
(m * pi + phi). The vector field only sees (phi, s), so forcing phases stay accurate
over 10^7-yr horizons while the reported theta remains unwrapped. Steps never cross
a period boundary, which makes stroboscopic samples exact step endpoints.
"""
import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np
import pandas as pd
from numba import njit

from . import config as C
from .model import _triaxial, _tidal_F, _tidal_F_prime
from .params import PhysicalParams, SpinState, DEFAULT_PARAMS, P_N, P_ZETA, P_ETA, P_LAM, fold_libration
from ..exceptions import InvalidParameters, StepUnderflow

logger = logging.getLogger(__name__)

# --- Dormand-Prince 5(4) tableau ---
C2, C3, C4, C5 = 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0
A21 = 1.0 / 5.0
A31, A32 = 3.0 / 40.0, 9.0 / 40.0
A41, A42, A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
A51, A52, A53, A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
A61, A62, A63, A64, A65 = 9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0
A71, A73, A74, A75, A76 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
E1, E3, E4, E5, E6, E7 = (71.0 / 57600.0, -71.0 / 16695.0, 71.0 / 1920.0,
                          -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0)
# dense output (Hairer's contd5)
D1, D3, D4 = -12715105075.0 / 11282082432.0, 87487479700.0 / 32700410799.0, -10690763975.0 / 1880347072.0
D5, D6, D7 = 701980252875.0 / 199316789632.0, -1453857185.0 / 822651844.0, 69997945.0 / 29380423.0

# --- PI controller ---
SAFE = 0.9
FAC_MIN = 0.2
FAC_MAX = 10.0
BETA = 0.04
EXPO1 = 0.2 - BETA * 0.75

# packed integrator config
Q_RTOL, Q_ATOL, Q_MAXSTEP, Q_KINK, Q_CLAMP, Q_HMIN = range(6)

STATUS_OK = 0
STATUS_UNDERFLOW = 1

WATCH_CAPTURE = 0
WATCH_LEVEL = 1

STATE_DIM = 2
VARIATIONAL_DIM = 7   # phi, theta_dot, M00, M01, M10, M11, log det M


@njit(cache=True)
def _field(s, y, p, variational, out):
    g, dg = _triaxial(y[0], s, p)
    lam_eta = p[P_LAM] * p[P_ETA]
    out[0] = y[1]
    out[1] = -p[P_ZETA] * g - lam_eta * _tidal_F(y[1], p)
    if variational:
        j21 = -p[P_ZETA] * dg
        j22 = -lam_eta * _tidal_F_prime(y[1], p)
        out[2] = y[4]
        out[3] = y[5]
        out[4] = j21 * y[2] + j22 * y[4]
        out[5] = j21 * y[3] + j22 * y[5]
        out[6] = j22   # Liouville: d(log det M)/dt = trace J


@njit(cache=True)
def _span(y, s0, s1, h, p, q, variational, ks, work, samp_s, out, i0, i1, m):
    """Advances y in place from phase s0 to s1 within one period; fills dense samples i0..i1-1."""
    dim = y.shape[0]
    k1, k2, k3, k4, k5, k6, k7 = ks[0], ks[1], ks[2], ks[3], ks[4], ks[5], ks[6]
    ytmp = work[0]
    ynew = work[1]
    s = s0
    i = i0
    steps = 0
    facold = 1e-4
    rejected = False
    tol = 1e-15 * (1.0 + abs(s1))
    _field(s, y, p, variational, k1)
    while s1 - s > tol:
        h = min(h, q[Q_MAXSTEP])
        if abs(p[P_LAM] * p[P_ETA] * _tidal_F_prime(y[1], p)) > q[Q_KINK]:
            h = min(h, q[Q_CLAMP])
        if h < q[Q_HMIN]:
            return h, steps, STATUS_UNDERFLOW, i
        h_free = h
        last = False
        if s + h >= s1 - tol:
            h = s1 - s
            last = True

        for c in range(dim):
            ytmp[c] = y[c] + h * A21 * k1[c]
        _field(s + C2 * h, ytmp, p, variational, k2)
        for c in range(dim):
            ytmp[c] = y[c] + h * (A31 * k1[c] + A32 * k2[c])
        _field(s + C3 * h, ytmp, p, variational, k3)
        for c in range(dim):
            ytmp[c] = y[c] + h * (A41 * k1[c] + A42 * k2[c] + A43 * k3[c])
        _field(s + C4 * h, ytmp, p, variational, k4)
        for c in range(dim):
            ytmp[c] = y[c] + h * (A51 * k1[c] + A52 * k2[c] + A53 * k3[c] + A54 * k4[c])
        _field(s + C5 * h, ytmp, p, variational, k5)
        for c in range(dim):
            ytmp[c] = y[c] + h * (A61 * k1[c] + A62 * k2[c] + A63 * k3[c] + A64 * k4[c] + A65 * k5[c])
        _field(s + h, ytmp, p, variational, k6)
        for c in range(dim):
            ynew[c] = y[c] + h * (A71 * k1[c] + A73 * k3[c] + A74 * k4[c] + A75 * k5[c] + A76 * k6[c])
        _field(s + h, ynew, p, variational, k7)
        steps += 1

        err = 0.0
        for c in range(dim):
            sc = q[Q_ATOL] + q[Q_RTOL] * max(abs(y[c]), abs(ynew[c]))
            e = h * (E1 * k1[c] + E3 * k3[c] + E4 * k4[c] + E5 * k5[c] + E6 * k6[c] + E7 * k7[c]) / sc
            err += e * e
        err = math.sqrt(err / dim)

        fac11 = err ** EXPO1
        if err <= 1.0:
            fac = fac11 / facold ** BETA
            fac = max(1.0 / FAC_MAX, min(1.0 / FAC_MIN, fac / SAFE))
            h_next = h / fac
            if rejected:
                h_next = min(h_next, h)
            facold = max(err, 1e-4)
            s_new = s1 if last else s + h
            while i < i1 and samp_s[i] <= s_new + (tol if last else 0.0):
                th = (samp_s[i] - s) / h
                th1 = 1.0 - th
                for c in range(2):
                    ydiff = ynew[c] - y[c]
                    bspl = h * k1[c] - ydiff
                    r4 = ydiff - h * k7[c] - bspl
                    r5 = h * (D1 * k1[c] + D3 * k3[c] + D4 * k4[c] + D5 * k5[c] + D6 * k6[c] + D7 * k7[c])
                    out[i, c] = y[c] + th * (ydiff + th1 * (bspl + th * (r4 + th1 * r5)))
                out[i, 0] += m * math.pi
                i += 1
            for c in range(dim):
                y[c] = ynew[c]
                k1[c] = k7[c]
            s = s_new
            rejected = False
            h = max(h_next, h_free) if last else h_next
        else:
            h = h / min(1.0 / FAC_MIN, fac11 / SAFE)
            rejected = True
    # the span may end within tol of s1 without a final step
    while i < i1 and samp_s[i] <= s1 + tol:
        out[i, 0] = y[0] + m * math.pi
        out[i, 1] = y[1]
        i += 1
    return h, steps, STATUS_OK, i


@njit(cache=True)
def _run(y, m, N, s, N_end, s_end, h, p, q, variational, samp_N, samp_s, out):
    """Advances from (N, s) to (N_end, s_end). Returns (m, h, steps, status)."""
    dim = y.shape[0]
    T0 = 2.0 * math.pi / p[P_N]
    ks = np.empty((7, dim))
    work = np.empty((2, dim))
    n_samp = samp_N.shape[0]
    i = 0
    steps = 0
    while True:
        end = T0 if N < N_end else s_end
        i1 = i
        while i1 < n_samp and samp_N[i1] == N:
            i1 += 1
        if end > s:
            h, nst, status, i = _span(y, s, end, h, p, q, variational, ks, work, samp_s, out, i, i1, m)
            steps += nst
            if status != STATUS_OK:
                return m, h, steps, status
        if N >= N_end:
            break
        N += 1
        s = 0.0
        shift = math.floor(y[0] / math.pi)
        y[0] -= shift * math.pi
        m += shift
    return m, h, steps, STATUS_OK


@njit(cache=True)
def _watch(y, m, N, s, N_max, h, p, q, mode, level, delta, lock):
    """
    Flows period by period and inspects every stroboscopic point.
    Returns (status, found, resonance, event_N, N, m, h, steps).
    """
    T0 = 2.0 * math.pi / p[P_N]
    n = p[P_N]
    ks = np.empty((7, 2))
    work = np.empty((2, 2))
    no_s = np.empty(0)
    no_out = np.empty((0, 2))
    steps = 0
    cur_j = 0
    count = 0
    z_min = 0.0
    z_max = 0.0
    start = N
    while N < N_max:
        h, nst, status, _ = _span(y, s, T0, h, p, q, False, ks, work, no_s, no_out, 0, 0, m)
        steps += nst
        if status != STATUS_OK:
            return status, False, 0, N, N, m, h, steps
        N += 1
        s = 0.0
        shift = math.floor(y[0] / math.pi)
        y[0] -= shift * math.pi
        m += shift
        if mode == WATCH_LEVEL:
            if y[1] <= level:
                return STATUS_OK, True, 0, N, N, m, h, steps
            continue
        ratio = y[1] / n
        j = int(np.rint(2.0 * ratio))
        if j != 0 and abs(ratio - 0.5 * j) < delta:
            # libration angle z = theta - (j/2) n t at t = N T0
            z = (m - j * N) * math.pi + y[0]
            if count == 0 or j != cur_j:
                cur_j = j
                count = 1
                z_min = z
                z_max = z
                start = N
            else:
                z_min = min(z_min, z)
                z_max = max(z_max, z)
                if z_max - z_min >= math.pi:
                    count = 1
                    z_min = z
                    z_max = z
                    start = N
                else:
                    count += 1
            if count >= lock:
                return STATUS_OK, True, cur_j, start, N, m, h, steps
        else:
            count = 0
    return STATUS_OK, False, 0, N, N, m, h, steps


@dataclass(frozen=True)
class IntegratorConfig:
    """Tolerances and step limits; steps are clamped near tidal kinks."""
    rel_tol: float = C.INTEGRATOR_DEFAULTS['rel_tol']
    abs_tol: float = C.INTEGRATOR_DEFAULTS['abs_tol']
    max_step: float = C.INTEGRATOR_DEFAULTS['max_step']
    kink_slope_threshold: float = C.INTEGRATOR_DEFAULTS['kink_slope_threshold']
    clamp_step: float = C.INTEGRATOR_DEFAULTS['clamp_step']
    min_step: float = C.INTEGRATOR_DEFAULTS['min_step']

    def __post_init__(self):
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise InvalidParameters("Integrator tolerances must be positive")
        if not 0 < self.clamp_step < self.max_step:
            raise InvalidParameters(f"Need 0 < clamp_step < max_step, got {self.clamp_step}, {self.max_step}")
        if self.min_step <= 0:
            raise InvalidParameters("min_step must be positive")

    @classmethod
    def survey(cls) -> 'IntegratorConfig':
        """Looser profile for basin surveys."""
        return cls(**C.SURVEY_PROFILE)

    @classmethod
    def precise(cls) -> 'IntegratorConfig':
        """Tighter profile for Newton refinement of periodic solutions."""
        return cls(**C.PRECISE_PROFILE)

    def tightened(self, factor: float) -> 'IntegratorConfig':
        return replace(self, rel_tol=self.rel_tol / factor, abs_tol=self.abs_tol / factor)

    def packed(self) -> np.ndarray:
        return np.array([self.rel_tol, self.abs_tol, self.max_step,
                         self.kink_slope_threshold, self.clamp_step, self.min_step])


INTEGRATOR_KEYS = frozenset(('rel_tol', 'abs_tol', 'max_step', 'kink_slope_threshold', 'clamp_step'))


class Sampling(ABC):
    """
    Abstract sampling rule for trajectory output.
    Each rule yields sample times as (period index, phase) pairs after the start.
    """
    @abstractmethod
    def sample_points(self, start: Tuple[int, float], end: Tuple[int, float], period: float):
        """
        :param start: (N, s) of the initial state.
        :param end: (N, s) of the final time.
        :param period: T0 in years.
        :return: Arrays (N, s) of sample points strictly after start, up to and including end.
        """
        pass


@dataclass(frozen=True)
class UniformSampling(Sampling):
    """Samples every `dt` years, plus the end point."""
    dt: float

    def sample_points(self, start, end, period):
        if self.dt <= 0:
            raise ValueError("Sampling interval must be positive")
        t0 = start[0] * period + start[1]
        t1 = end[0] * period + end[1]
        count = int(math.floor((t1 - t0) / self.dt * (1 + 1e-12)))
        times = t0 + self.dt * np.arange(1, count + 1)
        times = times[times < t1 - 1e-12 * max(1.0, abs(t1))]
        N = np.floor(times / period).astype(np.int64)
        s = times - N * period
        N, s = _normalise_points(N, np.clip(s, 0.0, period), period)
        keep = (N > start[0]) | ((N == start[0]) & (s > start[1]))
        N = np.append(N[keep], end[0])
        s = np.append(s[keep], end[1])
        return N, s


@dataclass(frozen=True)
class StroboscopicSampling(Sampling):
    """Samples at multiples of `every` orbital periods."""
    every: int = 1

    def sample_points(self, start, end, period):
        if self.every < 1:
            raise ValueError("Stroboscopic stride must be >= 1")
        first = start[0] + 1
        ks = np.arange(first, end[0] + 2, dtype=np.int64)
        ks = ks[ks % self.every == 0]
        # k T0 is the end of period k - 1
        N = ks - 1
        s = np.full(N.shape, period)
        keep = (N < end[0]) | ((N == end[0]) & (end[1] >= period))
        return N[keep], s[keep]


def _normalise_points(N, s, period):
    """Maps phase 0 of period N onto phase T0 of period N-1 so period ends own their samples."""
    N = np.asarray(N, dtype=np.int64).copy()
    s = np.asarray(s, dtype=float).copy()
    at_zero = s <= 0.0
    N[at_zero] -= 1
    s[at_zero] = period
    return N, s


def _split_time(t: float, period: float) -> Tuple[int, float]:
    N = int(math.floor(t / period))
    s = t - N * period
    if s >= period:
        N, s = N + 1, 0.0
    return N, max(s, 0.0)


@dataclass
class Trajectory:
    """Samples of (t, theta, theta_dot); theta is unwrapped."""
    t: np.ndarray
    theta: np.ndarray
    theta_dot: np.ndarray
    sampling: Optional[Sampling] = None
    steps: int = 0

    def __len__(self):
        return len(self.t)

    @property
    def final_state(self) -> SpinState:
        return SpinState(float(self.theta[-1]), float(self.theta_dot[-1]), float(self.t[-1]))

    def librations(self, omega0: float, n: float) -> np.ndarray:
        """z = theta - omega0 n t folded into (-pi/2, pi/2]."""
        return fold_libration(self.theta - omega0 * n * self.t)

    def to_frame(self, omega0: Optional[float] = None, n: Optional[float] = None) -> pd.DataFrame:
        frame = pd.DataFrame({'t': self.t, 'theta': self.theta, 'theta_dot': self.theta_dot})
        if omega0 is not None:
            frame['z'] = self.librations(omega0, n)
        return frame


@dataclass
class VariationalState:
    """End state plus the tangent matrix M(t), with M(t0) = I, and log det M from Liouville's formula."""
    state: SpinState
    M: np.ndarray
    log_det: float

    @property
    def det(self) -> float:
        return math.exp(self.log_det)


def _initial_step(config: IntegratorConfig, period: float) -> float:
    return min(config.max_step, period / 50.0)


def _flow(state, end, params, config, variational, samp_N=None, samp_s=None):
    period = params.period
    start = _split_time(state.t, period)
    N_end, s_end = end
    if (N_end, s_end) <= start:
        raise ValueError(f"End time must exceed the start time {state.t}")
    m0 = math.floor(state.theta / math.pi)
    dim = VARIATIONAL_DIM if variational else STATE_DIM
    y = np.zeros(dim)
    y[0] = state.theta - m0 * math.pi
    y[1] = state.theta_dot
    if variational:
        y[2] = 1.0
        y[5] = 1.0
    if samp_N is None:
        samp_N = np.empty(0, dtype=np.int64)
        samp_s = np.empty(0)
    out = np.empty((len(samp_N), 2))
    m, _, steps, status = _run(y, float(m0), start[0], start[1], N_end, s_end, _initial_step(config, period),
                               params.packed, config.packed(), variational, samp_N, samp_s, out)
    if status == STATUS_UNDERFLOW:
        raise StepUnderflow(f"Step fell below {config.min_step} yr integrating from t={state.t}")
    final = SpinState(m * math.pi + y[0], y[1], N_end * period + s_end)
    return y, final, out, steps


def _end_point(t_end: float, period: float) -> Tuple[int, float]:
    N, s = _split_time(t_end, period)
    if s == 0.0:
        return N - 1, period
    return N, s


def integrate(state: SpinState, t_end: float, config: Optional[IntegratorConfig] = None,
              params: PhysicalParams = DEFAULT_PARAMS, sampling: Optional[Sampling] = None) -> Trajectory:
    """
    Integrates the spin equation from `state` to `t_end`.

    :param sampling: Output rule; defaults to the end point only. The first sample is always the initial state.
    :raises StepUnderflow: If the adaptive step collapses.
    """
    config = config or IntegratorConfig()
    if not t_end > state.t:
        raise ValueError(f"t_end={t_end} must exceed state.t={state.t}")
    period = params.period
    end = _end_point(t_end, period)
    if sampling is None:
        samp_N, samp_s = np.array([end[0]], dtype=np.int64), np.array([end[1]])
    else:
        samp_N, samp_s = sampling.sample_points(_split_time(state.t, period), end, period)
    _, final, out, steps = _flow(state, end, params, config, False, samp_N, samp_s)
    t = samp_N * period + samp_s
    logger.debug("Integrated %.6g yr in %d steps (%d samples)", t_end - state.t, steps, len(t))
    return Trajectory(t=np.concatenate(([state.t], t)),
                      theta=np.concatenate(([state.theta], out[:, 0])),
                      theta_dot=np.concatenate(([state.theta_dot], out[:, 1])),
                      sampling=sampling, steps=steps)


def integrate_variational(state: SpinState, t_end: float, config: Optional[IntegratorConfig] = None,
                          params: PhysicalParams = DEFAULT_PARAMS) -> VariationalState:
    """Co-integrates dM/dt = J(t) M with M(t0) = I along the trajectory."""
    config = config or IntegratorConfig()
    if not t_end > state.t:
        raise ValueError(f"t_end={t_end} must exceed state.t={state.t}")
    y, final, _, _ = _flow(state, _end_point(t_end, params.period), params, config, True)
    return VariationalState(final, y[2:6].reshape(2, 2).copy(), float(y[6]))


def _periods_ahead(state: SpinState, periods: int, params: PhysicalParams) -> Tuple[int, float]:
    if periods < 1:
        raise ValueError(f"periods must be >= 1, got {periods}")
    N0, s0 = _split_time(state.t, params.period)
    if s0 == 0.0:
        return N0 + periods - 1, params.period
    return N0 + periods, s0


def stroboscopic_map(state: SpinState, periods: int = 1, config: Optional[IntegratorConfig] = None,
                     params: PhysicalParams = DEFAULT_PARAMS) -> SpinState:
    """Flows the state forward exactly `periods` orbital periods."""
    config = config or IntegratorConfig()
    _, final, _, _ = _flow(state, _periods_ahead(state, periods, params), params, config, False)
    return final


def stroboscopic_variational(state: SpinState, periods: int, config: Optional[IntegratorConfig] = None,
                             params: PhysicalParams = DEFAULT_PARAMS) -> VariationalState:
    """Stroboscopic map together with its tangent matrix (the monodromy matrix after one full period)."""
    config = config or IntegratorConfig()
    y, final, _, _ = _flow(state, _periods_ahead(state, periods, params), params, config, True)
    return VariationalState(final, y[2:6].reshape(2, 2).copy(), float(y[6]))


def _watch_from(state, max_time, params, config, mode, level=0.0, delta=0.0, lock=1):
    period = params.period
    N0, s0 = _split_time(state.t, period)
    if s0 == 0.0:
        N0, s0 = N0 - 1, period
    N_max = int(math.floor((state.t + max_time) / period))
    m0 = math.floor(state.theta / math.pi)
    y = np.array([state.theta - m0 * math.pi, state.theta_dot])
    status, found, j, event_N, N, m, _, steps = _watch(
        y, float(m0), N0, s0, N_max, _initial_step(config, period), params.packed, config.packed(),
        mode, level, delta, lock)
    if status == STATUS_UNDERFLOW:
        raise StepUnderflow(f"Step fell below {config.min_step} yr watching from t={state.t}")
    final = SpinState(m * math.pi + y[0], y[1], N * period)
    return found, j, event_N * period, final, steps


def watch_capture(state: SpinState, delta: float, lock_periods: int, max_time: float,
                  config: Optional[IntegratorConfig] = None, params: PhysicalParams = DEFAULT_PARAMS):
    """
    Monitors stroboscopic points until the spin locks onto a j:2 resonance.

    A lock needs |theta_dot/n - j/2| < delta together with a libration angle
    theta - (j/2) n t whose range stays below pi, over `lock_periods` consecutive periods.

    :return: (j or None, lock start time, final state).
    """
    config = config or IntegratorConfig.survey()
    found, j, t_event, final, steps = _watch_from(state, max_time, params, config, WATCH_CAPTURE,
                                                  delta=delta, lock=lock_periods)
    logger.debug("Capture watch from %s: found=%s j=%d after %d steps", state, found, j, steps)
    return (j if found else None), (t_event if found else math.nan), final


def first_passage(state: SpinState, level: float, max_time: float,
                  config: Optional[IntegratorConfig] = None, params: PhysicalParams = DEFAULT_PARAMS):
    """
    First stroboscopic time at which theta_dot drops to `level` or below.

    :return: (time or None, final state).
    """
    config = config or IntegratorConfig()
    found, _, t_event, final, _ = _watch_from(state, max_time, params, config, WATCH_LEVEL, level=level)
    return (t_event if found else None), final
