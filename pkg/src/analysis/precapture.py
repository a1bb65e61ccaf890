"""
Fast/slow approximation of the spin decay before capture.

The tidal torque is replaced by its tangent line eta F(theta_dot) ~ a - b theta_dot at an
operating point; the triaxial torque then only adds small oscillations of frequencies Omega_k
on top of an exponential approach to a / b.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np
import pandas as pd

from ..dynamics import config as C
from ..dynamics.integrator import IntegratorConfig, first_passage
from ..dynamics.model import tidal_F, tidal_F_prime
from ..dynamics.params import PhysicalParams, SpinState, DEFAULT_PARAMS
from ..exceptions import KinkProximity, NoConvergence, Unreachable

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LinearTidalFit:
    """Tangent line of lambda * eta * F at `operating_point`: a - b theta_dot."""
    a: float
    b: float
    operating_point: float

    @property
    def asymptote(self) -> float:
        return self.a / self.b

    def __call__(self, theta_dot):
        return self.a - self.b * np.asarray(theta_dot, dtype=float)


@dataclass
class PrecaptureSolution:
    theta0: float
    theta_dot0: float
    Omega: Dict[int, float]
    phi: float
    R: float
    shift: float
    iterations: int = 0
    coefficients: Dict[int, float] = field(default_factory=dict)

    @property
    def max_deviation(self) -> float:
        """max_k |Omega_k - (theta_dot0 - k n)|; the shift is common to every k."""
        return abs(self.shift)


def fit_linear_tidal(theta_dot_op: float, params: PhysicalParams = DEFAULT_PARAMS) -> LinearTidalFit:
    """
    Tangency of eta F(theta_dot) and a - b theta_dot at `theta_dot_op`.

    :raises KinkProximity: When theta_dot_op is within 0.02 n of a half-integer multiple of n.
    """
    ratio = theta_dot_op / params.n
    nearest = round(2.0 * ratio) / 2.0
    if abs(ratio - nearest) < C.KINK_EXCLUSION:
        raise KinkProximity(f"Operating point {ratio:.4f} n lies within {C.KINK_EXCLUSION} n of the kink at {nearest} n")
    eta = params.lam * params.eta
    b = -eta * tidal_F_prime(theta_dot_op, params)
    a = eta * tidal_F(theta_dot_op, params) + b * theta_dot_op
    logger.debug("Linear tidal fit at %.4f n: a=%.4g b=%.4g", ratio, a, b)
    return LinearTidalFit(a=float(a), b=float(b), operating_point=float(theta_dot_op))


def _triaxial_weights(params: PhysicalParams) -> Dict[int, float]:
    return {k: (a_k if k == C.MAIN_HARMONIC else params.S * a_k)
            for k, a_k in params.A.items() if a_k != 0.0}


def solve_Omega(theta0: float, theta_dot0: float, fit: LinearTidalFit,
                params: PhysicalParams = DEFAULT_PARAMS) -> PrecaptureSolution:
    """
    Solves Omega_k = theta_dot0 - k n - zeta cos(2 theta0) sum_k A_k / Omega_k by fixed-point iteration.

    Every Omega_k shares the same shift from its seed theta_dot0 - k n, so the iteration runs on that shift.

    :raises NoConvergence: After 100 iterations without a step below 1e-10.
    """
    weights = _triaxial_weights(params)
    ks = np.array(list(weights), dtype=float)
    amps = np.array(list(weights.values()))
    seeds = theta_dot0 - ks * params.n
    scale = -params.zeta * math.cos(2.0 * theta0)
    shift = 0.0
    for it in range(1, C.OMEGA_MAX_ITERATIONS + 1):
        new = scale * float(np.sum(amps / (seeds + shift)))
        if abs(new - shift) < C.OMEGA_FIXED_POINT_TOL:
            shift = new
            break
        shift = new
    else:
        raise NoConvergence(f"Omega_k iteration did not settle within {C.OMEGA_MAX_ITERATIONS} steps "
                            f"(theta0={theta0:.4f}, theta_dot0={theta_dot0:.4f})")
    omega = {int(k): float(s + shift) for k, s in zip(ks, seeds)}
    if min(abs(v) for v in omega.values()) <= 1.0:
        logger.warning("Some |Omega_k| <= 1 at theta_dot0=%.4f: outside the fast/slow regime", theta_dot0)
    return PrecaptureSolution(theta0=theta0, theta_dot0=theta_dot0, Omega=omega, phi=2.0 * theta0,
                              R=theta_dot0 - fit.asymptote, shift=shift, iterations=it, coefficients=weights)


def thetadot_approx(t, sol: PrecaptureSolution, fit: LinearTidalFit, params: PhysicalParams = DEFAULT_PARAMS):
    """
    theta_dot(t) ~ a/b + e^{bt} (theta_dot0 - a/b)
                   + zeta sum_k [A_k/Omega_k cos(Omega_k t + 2 theta0) - e^{bt} cos(2 theta0) A_k/Omega_k].
    """
    t = np.asarray(t, dtype=float)
    growth = np.exp(fit.b * t)
    value = fit.asymptote + growth * sol.R
    for k, a_k in sol.coefficients.items():
        ratio = a_k / sol.Omega[k]
        value = value + params.zeta * ratio * (np.cos(sol.Omega[k] * t + sol.phi) - growth * math.cos(sol.phi))
    return float(value) if value.ndim == 0 else value


def time_to_capture(theta_dot0: float, target: float, fit: LinearTidalFit) -> float:
    """
    Time for the smooth part of the decay to go from theta_dot0 down to `target`, in years.

    :raises Unreachable: Unless R = theta_dot0 - a/b < 0 and target <= theta_dot0.
    """
    R = theta_dot0 - fit.asymptote
    if R >= 0.0:
        raise Unreachable(f"R = {R:.4g} >= 0: the spin does not decay from {theta_dot0:.4f}")
    if target > theta_dot0:
        raise Unreachable(f"Target {target:.4f} lies above the initial spin {theta_dot0:.4f}")
    return math.log((R - (theta_dot0 - target)) / R) / fit.b


def max_omega_deviation(theta_dot0: float, fit: LinearTidalFit, params: PhysicalParams = DEFAULT_PARAMS,
                        samples: int = 721) -> float:
    """max over theta0 in [0, pi) of max_k |Omega_k - (theta_dot0 - k n)|."""
    return max(solve_Omega(th, theta_dot0, fit, params).max_deviation
               for th in np.linspace(0.0, math.pi, samples, endpoint=False))


def decay_curve(sol: PrecaptureSolution, fit: LinearTidalFit, t_end: float, samples: int = 2001,
                params: PhysicalParams = DEFAULT_PARAMS) -> pd.DataFrame:
    """The approximate theta_dot(t) on a uniform grid over [0, t_end]."""
    t = np.linspace(0.0, t_end, samples)
    return pd.DataFrame({'t': t, 'theta_dot_approx': thetadot_approx(t, sol, fit, params)})


def time_to_reach(state: SpinState, target: float, max_time: float, params: PhysicalParams = DEFAULT_PARAMS,
                  config: Optional[IntegratorConfig] = None) -> Optional[float]:
    """Numerical first stroboscopic time at which theta_dot <= target, or None within max_time."""
    t_hit, _ = first_passage(state, target, max_time, config, params)
    if t_hit is not None:
        logger.info("theta_dot reached %.4f n at t=%.4g yr", target / params.n, t_hit)
    return t_hit
