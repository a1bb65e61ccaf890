"""
Periodic p:2 attractors of the spin equation.

Picard zeroth and first approximations seed a Newton iteration on the stroboscopic
map over two orbital periods; the tangent matrix of the one-period map at the refined
point gives the Floquet multipliers.
"""
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from ..dynamics import config as C
from ..dynamics.integrator import IntegratorConfig, VariationalState, stroboscopic_variational
from ..dynamics.model import gamma_F
from ..dynamics.params import PhysicalParams, SpinState, DEFAULT_PARAMS
from ..exceptions import Infeasible, NoConvergence
from .quadrature import composite_gauss

logger = logging.getLogger(__name__)

# resonances with a tabulated periodic solution pair
CENSUS_RESONANCES = (-2, -1, 1, 2, 3, 4, 5, 6, 7, 8)


@dataclass(frozen=True)
class Resonance:
    """Spin-orbit resonance p:q with q fixed at 2, i.e. theta_dot ~ (p/2) n."""
    p: int
    q: int = 2

    def __post_init__(self):
        if self.q != 2:
            raise ValueError(f"Only q = 2 resonances exist in this model, got q={self.q}")
        if self.p == 0 or self.p not in C.TRIAXIAL_INDICES:
            raise ValueError(f"p must lie in -2..8 and be non-zero, got {self.p}")

    @property
    def omega0(self) -> float:
        return self.p / self.q

    @property
    def k0(self) -> int:
        """Index of the resonant Fourier harmonic, 2 p / q."""
        return self.p

    @property
    def label(self) -> str:
        frac = Fraction(self.p, self.q)
        return f"{frac.numerator}:{frac.denominator}"


@dataclass
class PicardApproximation:
    """Zeroth and first Picard approximations of a p:2 periodic solution."""
    resonance: Resonance
    theta_bar0: float
    Theta_bar1: float
    harmonics: Dict[int, float]
    J_value: float
    gamma_F_value: float

    def candidates(self, first: bool = True) -> Tuple[float, float, float, float]:
        """The four constants: x, pi/2 - x, x - pi, pi/2 - x - pi."""
        return _four_roots(self.Theta_bar1 if first else self.theta_bar0)

    def seed(self, branch: int, params: PhysicalParams = DEFAULT_PARAMS) -> SpinState:
        """
        Initial condition at t = 0 of the first-approximation waveform on branch 1..4.
        """
        Theta = self.candidates(first=True)[branch - 1]
        theta0 = self.candidates(first=False)[branch - 1]
        w = 2.0 * self.resonance.omega0
        theta = Theta
        theta_dot = params.n * self.resonance.omega0
        for k, amp in self.harmonics.items():
            theta += params.zeta * amp * math.sin(2.0 * theta0)
            theta_dot += params.zeta * amp * (w - k) * params.n * math.cos(2.0 * theta0)
        return SpinState(theta, theta_dot, 0.0)


def _four_roots(x: float) -> Tuple[float, float, float, float]:
    second = math.pi / 2 - x
    return x, second, x - math.pi, second - math.pi


def _inverse_sine_root(value: float, what: str, resonance: Resonance) -> float:
    if abs(value) >= 1.0:
        raise Infeasible(f"|{what}| = {abs(value):.4g} >= 1 for resonance {resonance.label}")
    return 0.5 * math.asin(value)


def picard_zeroth(res: Resonance, params: PhysicalParams = DEFAULT_PARAMS) -> Tuple[float, float, float, float]:
    """
    Solves A_k0 sin(2 theta) + gamma F(n omega0) = 0.

    :return: theta_bar0 candidates (1) in (-pi/4, pi/4), (2) = pi/2 - (1), and both shifted by -pi.
    :raises Infeasible: When |gamma F / A_k0| >= 1.
    """
    a_k0 = params.coefficient(res.k0)
    if a_k0 == 0.0:
        raise Infeasible(f"A_{res.k0} vanishes; resonance {res.label} has no zeroth approximation")
    ratio = -gamma_F(params.n * res.omega0, params) / a_k0
    return _four_roots(_inverse_sine_root(ratio, 'gamma F / A_k0', res))


def first_order_harmonics(res: Resonance, params: PhysicalParams = DEFAULT_PARAMS) -> Dict[int, float]:
    """Amplitudes A_k / ((2 omega0 - k)^2 n^2) of the first-approximation waveform, k != k0."""
    w = 2.0 * res.omega0
    return {k: a_k / ((w - k) ** 2 * params.n ** 2)
            for k, a_k in sorted(params.A.items()) if k != res.k0 and a_k != 0.0}


def _xi1_dot(tau, res, theta_bar0, params):
    w = 2.0 * res.omega0
    total = np.zeros_like(tau)
    for k, a_k in params.A.items():
        if k == res.k0 or a_k == 0.0:
            continue
        freq = (w - k) * params.n
        total += a_k / freq * np.cos(2.0 * theta_bar0 + freq * tau)
    return params.zeta * total


def compute_J(res: Resonance, theta_bar0: float, params: PhysicalParams = DEFAULT_PARAMS) -> float:
    """
    Average of gamma F(n omega0 + xi1_dot(tau)) over one period 2 pi q / n.
    """
    base = params.n * res.omega0

    def integrand(tau):
        return gamma_F(base + _xi1_dot(tau, res, theta_bar0, params), params)

    return composite_gauss(integrand, 0.0, 2.0 * math.pi * res.q / params.n)


def picard_first(res: Resonance, params: PhysicalParams = DEFAULT_PARAMS) -> PicardApproximation:
    """
    First Picard approximation: Theta_bar1 = asin(-J / A_k0) / 2 with J the averaged torque.

    :raises Infeasible: When either solvability condition fails.
    """
    theta_bar0 = picard_zeroth(res, params)[0]
    J = compute_J(res, theta_bar0, params)
    Theta_bar1 = _inverse_sine_root(-J / params.coefficient(res.k0), 'J / A_k0', res)
    approx = PicardApproximation(resonance=res, theta_bar0=theta_bar0, Theta_bar1=Theta_bar1,
                                 harmonics=first_order_harmonics(res, params), J_value=J,
                                 gamma_F_value=float(gamma_F(params.n * res.omega0, params)))
    logger.debug("Picard %s: theta_bar0=%.6g J=%.6g Theta_bar1=%.6g", res.label, theta_bar0, J, Theta_bar1)
    return approx


@dataclass
class PeriodicSolution:
    """Fixed point of the stroboscopic map over q periods, with the one-period monodromy matrix."""
    resonance: Resonance
    section_point: SpinState
    period: float
    monodromy: np.ndarray
    log_det: float
    floquet: np.ndarray
    stable: bool
    iterations: int
    residual: float
    branch: Optional[int] = None


@dataclass
class StabilityRecord:
    """Floquet multipliers with the summary quantities reported per row."""
    multipliers: np.ndarray
    complex_pair: bool
    modulus_minus_one: Optional[float]
    real_values: Optional[Tuple[float, float]]
    det: float
    stable: bool


def _ordered_multipliers(values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=complex)
    if abs(values[0].imag) > 0 or abs(values[1].imag) > 0:
        return np.array(sorted(values, key=lambda v: -v.imag))
    return np.array(sorted(values, key=lambda v: v.real))


def _scaled_residual(image: SpinState, x: np.ndarray, shift: float, n: float) -> np.ndarray:
    return np.array([image.theta - x[0] - shift, (image.theta_dot - x[1]) / n])


def one_period_monodromy(section_point: SpinState, config: Optional[IntegratorConfig] = None,
              params: PhysicalParams = DEFAULT_PARAMS) -> VariationalState:
    """
    Tangent matrix of the one-period stroboscopic map at a periodic point.

    The flow commutes with theta -> theta + pi, so a fixed point of the q-period map is
    a fixed point of the one-period map modulo pi and its multipliers are read there.
    """
    return stroboscopic_variational(section_point, 1, config or IntegratorConfig.precise(), params)


def refine_periodic(guess: SpinState, res: Resonance, config: Optional[IntegratorConfig] = None,
                    params: PhysicalParams = DEFAULT_PARAMS, tol: float = C.NEWTON_TOL,
                    max_steps: int = C.NEWTON_MAX_STEPS) -> PeriodicSolution:
    """
    Newton iteration on P(x) - x = 0 with P the stroboscopic map over q periods.

    The Jacobian is M - I with M the tangent matrix over q periods; a step is halved
    (at most five times) while the scaled residual does not decrease.

    :raises NoConvergence: After `max_steps` Newton steps.
    """
    config = config or IntegratorConfig.precise()
    n = params.n
    shift = 2.0 * math.pi * res.omega0 * res.q     # theta advance over q periods
    scale = np.array([1.0, 1.0 / n])
    x = np.array([guess.theta, guess.theta_dot])

    def evaluate(point):
        var = stroboscopic_variational(SpinState(point[0], point[1], 0.0), res.q, config, params)
        return var, _scaled_residual(var.state, point, shift, n)

    var, r = evaluate(x)
    norm = float(np.linalg.norm(r))
    for step in range(max_steps + 1):
        logger.debug("Newton %s step %d: residual %.3e", res.label, step, norm)
        if norm < tol:
            section = SpinState(x[0] % math.pi, x[1], 0.0)
            one_period = one_period_monodromy(section, config, params)
            floquet = _ordered_multipliers(np.linalg.eigvals(one_period.M))
            sol = PeriodicSolution(resonance=res, section_point=section, period=res.q * params.period,
                                   monodromy=one_period.M, log_det=one_period.log_det,
                                   floquet=floquet, stable=bool(np.max(np.abs(floquet)) < 1.0),
                                   iterations=step, residual=norm)
            sol.stable = classify(sol).stable
            return sol
        if step == max_steps:
            break
        jac = (var.M - np.eye(2)) * scale[:, None]
        try:
            dx = np.linalg.solve(jac, -r)
        except np.linalg.LinAlgError:
            dx = np.linalg.lstsq(jac, -r, rcond=None)[0]
        factor = 1.0
        for _ in range(C.NEWTON_MAX_HALVINGS + 1):
            trial = x + factor * dx
            var_t, r_t = evaluate(trial)
            norm_t = float(np.linalg.norm(r_t))
            if norm_t < norm:
                break
            factor *= 0.5
        x, var, r, norm = trial, var_t, r_t, norm_t
    raise NoConvergence(f"Newton did not converge for {res.label} from {guess}: residual {norm:.3e}")


def classify(sol: PeriodicSolution) -> StabilityRecord:
    """
    Summarises the Floquet multipliers: |lambda| - 1 for a conjugate pair, both values for a real pair.
    """
    values = sol.floquet
    det = math.exp(sol.log_det)
    complex_pair = bool(abs(values[0].imag) > 0.0)
    if complex_pair:
        # both moduli equal sqrt(det M); the Liouville log-determinant keeps tiny offsets from 1 accurate
        modulus_minus_one = math.expm1(0.5 * sol.log_det)
        real_values = None
        stable = modulus_minus_one < 0.0
    else:
        modulus_minus_one = None
        real_values = (float(values[0].real), float(values[1].real))
        stable = max(abs(v) for v in real_values) < 1.0
    return StabilityRecord(multipliers=values, complex_pair=complex_pair, modulus_minus_one=modulus_minus_one,
                           real_values=real_values, det=det, stable=stable)


def _census_row(p: int, branch: int, params: PhysicalParams, config: IntegratorConfig) -> PeriodicSolution:
    res = Resonance(p)
    approx = picard_first(res, params)
    sol = refine_periodic(approx.seed(branch, params), res, config, params)
    sol.branch = branch
    return sol


def periodic_census(params: PhysicalParams = DEFAULT_PARAMS, config: Optional[IntegratorConfig] = None,
                    resonances=CENSUS_RESONANCES, jobs: int = 1) -> List[PeriodicSolution]:
    """
    Refines both periodic solutions (branches 1 and 2) of every resonance, in parallel.
    """
    config = config or IntegratorConfig.precise()
    tasks = [(p, branch) for p in resonances for branch in (1, 2)]
    return Parallel(n_jobs=jobs)(delayed(_census_row)(p, branch, params, config) for p, branch in tasks)


def census_frame(solutions: List[PeriodicSolution], params: PhysicalParams = DEFAULT_PARAMS) -> pd.DataFrame:
    """Table with columns p, q, theta0, thetadot0_over_n, re_l1, im_l1, re_l2, im_l2, stable."""
    rows = []
    for sol in solutions:
        l1, l2 = sol.floquet
        rows.append({
            'p': sol.resonance.p,
            'q': sol.resonance.q,
            'theta0': sol.section_point.theta,
            'thetadot0_over_n': sol.section_point.theta_dot / params.n,
            're_l1': l1.real, 'im_l1': l1.imag,
            're_l2': l2.real, 'im_l2': l2.imag,
            'stable': sol.stable,
        })
    return pd.DataFrame(rows, columns=['p', 'q', 'theta0', 'thetadot0_over_n',
                                       're_l1', 'im_l1', 're_l2', 'im_l2', 'stable'])
