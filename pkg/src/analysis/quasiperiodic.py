"""
Analytic construction of the quasi-periodic 3:2 attractor.

In the libration variable xi = 2 theta - 3 n t the equation becomes a forced, damped
pendulum of frequency omega = sqrt(2 zeta A_3). Boundedness of the second approximation
fixes the amplitude through the root a* of I2, and the detuning mu fixes the slow
frequency omega_L = sqrt(omega^2 - mu zeta). Wherever omega_L enters a sum or integral
it is approximated by omega.
"""
import logging
import math
from dataclasses import dataclass, field, asdict
from typing import Dict, Optional, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.optimize import bisect
from scipy.spatial.distance import directed_hausdorff

from ..dynamics import config as C
from ..dynamics.model import tidal_F, xi_kernel
from ..dynamics.params import PhysicalParams, DEFAULT_PARAMS
from ..exceptions import NoRoot
from .quadrature import composite_gauss, gauss_grid

logger = logging.getLogger(__name__)

K0 = C.MAIN_HARMONIC
SIDEBANDS = (-5, -4, -3, -2, -1, 1, 2, 3, 4, 5)
TWO_PI = 2.0 * math.pi


@dataclass
class NormalForm:
    """First-order constants of the 3:2 libration equation."""
    omega: float
    B: float
    rho: float
    beta_harmonics: Dict[int, float]
    b_harmonics: Dict[int, float]
    sidebands: Dict[int, float]
    beta_sup: float
    eps: float

    @property
    def two_eps_B_over_omega(self) -> float:
        return 2.0 * self.eps * self.B / self.omega


def _sideband_coefficients(params: PhysicalParams) -> Dict[int, float]:
    # B_i = A_{i+3}, scaled by S off the main harmonic
    return {i: params.S * params.coefficient(i + K0) for i in SIDEBANDS}


def phi_torque(x, params: PhysicalParams = DEFAULT_PARAMS):
    """Phi(x) = F((3n + x) / 2), the tidal function seen by the libration variable."""
    return tidal_F((3.0 * params.n + np.asarray(x, dtype=float)) / 2.0, params)


def _beta(psi, harmonics):
    psi = np.asarray(psi, dtype=float)
    return sum(c * np.sin(i * psi) for i, c in harmonics.items())


def _b(psi, harmonics):
    psi = np.asarray(psi, dtype=float)
    return sum(c * np.cos(i * psi) for i, c in harmonics.items())


def normal_form(params: PhysicalParams = DEFAULT_PARAMS) -> NormalForm:
    """
    omega, B, rho and the harmonics of beta(psi) and b(psi) = d beta(n t)/dt, with omega_L ~ omega.
    """
    eps = params.zeta
    n = params.n
    omega = math.sqrt(2.0 * params.zeta * params.coefficient(K0))
    B_i = _sideband_coefficients(params)
    B = 0.0
    beta_h, b_h = {}, {}
    for i, coeff in B_i.items():
        if coeff == 0.0:
            continue
        denom = (i * n) ** 2 - omega ** 2
        B += coeff * i * n / denom
        beta_h[i] = -2.0 * eps * coeff / denom
        b_h[i] = -2.0 * eps * i * n * coeff / denom
    rho = 2.0 * params.gamma * eps * float(phi_torque(0.0, params)) / omega ** 2
    psi = np.linspace(0.0, TWO_PI, 20001)
    beta_sup = float(np.max(np.abs(_beta(psi, beta_h))))
    nf = NormalForm(omega=omega, B=B, rho=rho, beta_harmonics=beta_h, b_harmonics=b_h,
                    sidebands=B_i, beta_sup=beta_sup, eps=eps)
    logger.debug("Normal form: omega=%.6g B=%.6g rho=%.4g", omega, B, rho)
    return nf


def I1(C0: float, params: PhysicalParams = DEFAULT_PARAMS, tol: float = 1e-12) -> float:
    """Average over psi of cos(psi) Phi(C0 omega cos psi)."""
    omega = math.sqrt(2.0 * params.zeta * params.coefficient(K0))

    def integrand(psi):
        return np.cos(psi) * phi_torque(C0 * omega * np.cos(psi), params)

    return composite_gauss(integrand, 0.0, TWO_PI, panels=64, tol=tol)


def _phi_smooth(x, params):
    # Phi without its k = 3 term, which is the only one singular near x = 0
    a3 = params.coefficient(K0)
    return phi_torque(x, params) + a3 * a3 * xi_kernel(x, params)


def _graded_nodes(levels: int, nodes: int = C.GAUSS_NODES):
    """Gauss rule on [0, 1] with panels halving toward r = 0."""
    x, w = leggauss(nodes)
    edges = np.concatenate([[0.0], 0.5 ** np.arange(levels, -1, -1)])
    left, width = edges[:-1], np.diff(edges)
    r = (left[:, None] + 0.5 * width[:, None] * (x + 1.0)).ravel()
    weights = (0.5 * width[:, None] * w).ravel()
    return r, weights


def _kink_average(a, b, r, wr, params):
    """
    Mean over psi1 of cos(psi1) times the k = 3 term -A_3^2 Xi(a cos psi1 + b), for each b.

    The psi1 range is folded onto [0, pi] and split at the angle where the argument
    crosses zero; both halves use panels graded toward that angle.
    """
    a3 = params.coefficient(K0)
    kink = np.arccos(np.clip(-b / a, -1.0, 1.0))[:, None]
    total = np.zeros(b.shape)
    for length in (-kink, math.pi - kink):
        phi = kink + length * r
        values = np.cos(phi) * xi_kernel(b[:, None] + a * np.cos(phi), params)
        total += (values * np.abs(length)) @ wr
    return -a3 * a3 * total / math.pi


def I2(a: float, params: PhysicalParams = DEFAULT_PARAMS, nf: Optional[NormalForm] = None,
       tol: float = C.I2_TOL) -> float:
    """
    Torus average of cos(psi1) Phi(a cos psi1 + b(psi2)); odd in a.

    Phi minus its k = 3 term is smooth on the torus and takes a fixed tensor Gauss rule.
    The k = 3 term has a spike of width ~1e-4 at zero argument; its psi1 average is done
    on kink-graded panels and the psi2 average by adaptive composite Gauss to `tol`.
    """
    if a == 0.0:
        return 0.0
    if a < 0.0:
        return -I2(-a, params, nf, tol)
    nf = nf or normal_form(params)
    psi1, w1 = gauss_grid(0.0, TWO_PI, C.I2_PSI1_PANELS)
    x2, w2 = leggauss(C.I2_PSI2_NODES)
    psi2 = np.pi * (x2 + 1.0)
    arg = a * np.cos(psi1)[:, None] + (np.zeros_like(psi2) + _b(psi2, nf.b_harmonics))
    smooth = float(w1 @ (np.cos(psi1)[:, None] * _phi_smooth(arg, params)) @ (np.pi * w2)) / TWO_PI ** 2

    r, wr = _graded_nodes(C.I2_KINK_LEVELS)

    def kink_term(psi):
        b = np.zeros_like(psi) + _b(psi, nf.b_harmonics)
        return _kink_average(a, b, r, wr, params)

    singular = composite_gauss(kink_term, 0.0, TWO_PI, panels=C.I2_PSI2_PANELS, tol=tol)
    logger.debug("I2(%.4g): smooth %.6g, k=3 term %.6g", a, smooth, singular)
    return smooth + singular


def _smooth_weights(count: int) -> np.ndarray:
    s = (np.arange(count) + 0.5) / count
    w = np.exp(-1.0 / (s * (1.0 - s)))
    return w / w.sum()


def I2_time_average(a: float, params: PhysicalParams = DEFAULT_PARAMS, nf: Optional[NormalForm] = None,
                    slow_periods: int = 200, samples_per_fast_period: int = 128) -> float:
    """
    Time average of cos(omega t) Phi(a cos(omega t) + b(n t)) over many slow periods,
    with a smooth bump weight so the quasi-periodic average converges quickly.
    """
    nf = nf or normal_form(params)
    horizon = slow_periods * TWO_PI / nf.omega
    count = int(horizon / (TWO_PI / params.n) * samples_per_fast_period)
    t = (np.arange(count) + 0.5) * horizon / count
    values = np.cos(nf.omega * t) * phi_torque(a * np.cos(nf.omega * t) + _b(params.n * t, nf.b_harmonics), params)
    return float(_smooth_weights(count) @ values)


def find_amplitude_root(params: PhysicalParams = DEFAULT_PARAMS, nf: Optional[NormalForm] = None,
                        bracket: Tuple[float, float] = C.ROOT_BRACKET) -> float:
    """
    First sign change of I2 on a log-spaced grid over `bracket`, refined by bisection.

    :raises NoRoot: When I2 keeps its sign over the bracket.
    """
    nf = nf or normal_form(params)
    grid = np.geomspace(bracket[0], bracket[1], C.ROOT_GRID_POINTS)
    values = [I2(a, params, nf) for a in grid]
    for lo, hi, f_lo, f_hi in zip(grid[:-1], grid[1:], values[:-1], values[1:]):
        if f_lo == 0.0:
            return float(lo)
        if f_lo * f_hi < 0.0:
            root = bisect(lambda a: I2(a, params, nf), lo, hi, xtol=1e-15, rtol=C.ROOT_RTOL)
            logger.info("I2 root a* = %.6g in [%.4g, %.4g]", root, lo, hi)
            return float(root)
    raise NoRoot(f"I2 has no sign change on [{bracket[0]}, {bracket[1]}]")


@dataclass
class QpConstruction:
    """All constants of the analytic quasi-periodic 3:2 attractor."""
    omega: float
    omega_L: float
    mu: float
    mu_eps: float
    C1: float
    alpha: float
    a_root: float
    B: float
    two_eps_B_over_omega: float
    rho: float
    beta_harmonics: Dict[int, float]
    beta_sup: float
    D: float
    eps: float
    # the a = 0 root: it leaves mu undetermined and is not the physical attractor
    C1_trivial: float
    trivial_root_physical: bool = False
    b_harmonics: Dict[int, float] = field(default_factory=dict)

    @property
    def slow_amplitude(self) -> float:
        """Amplitude alpha / 2 of the slow component of z = xi / 2."""
        return 0.5 * self.alpha

    def to_dict(self) -> Dict[str, object]:
        d = asdict(self)
        d['beta_harmonics'] = {str(k): v for k, v in self.beta_harmonics.items()}
        d['b_harmonics'] = {str(k): v for k, v in self.b_harmonics.items()}
        d['omega_minus_omega_L'] = self.omega - self.omega_L
        d['slow_amplitude'] = self.slow_amplitude
        return d


def sideband_sum_D(nf: NormalForm, params: PhysicalParams = DEFAULT_PARAMS) -> float:
    """D = sum_i B_i (B_i - B_-i) / ((i n)^2 - omega^2)."""
    B_i = nf.sidebands
    return sum(B_i[i] * (B_i[i] - B_i[-i]) / ((i * params.n) ** 2 - nf.omega ** 2) for i in SIDEBANDS)


def solve_construction(params: PhysicalParams = DEFAULT_PARAMS) -> QpConstruction:
    """
    Amplitude and slow frequency of the quasi-periodic attractor from the root a* of I2.

    :raises NoRoot: When I2 has no sign change on (0, 0.02].
    """
    nf = normal_form(params)
    eps = params.zeta
    a_root = find_amplitude_root(params, nf)
    two_eps_B = 2.0 * eps * nf.B
    C1 = (a_root - two_eps_B) / nf.omega
    alpha = C1 + two_eps_B / nf.omega
    D = sideband_sum_D(nf, params)
    mu = params.coefficient(K0) * alpha ** 2 / 4.0 + 2.0 * eps * D
    mu_eps = mu * eps
    omega_L = math.sqrt(nf.omega ** 2 - mu_eps)
    construction = QpConstruction(
        omega=nf.omega, omega_L=omega_L, mu=mu, mu_eps=mu_eps, C1=C1, alpha=alpha, a_root=a_root,
        B=nf.B, two_eps_B_over_omega=two_eps_B / nf.omega, rho=nf.rho, beta_harmonics=nf.beta_harmonics,
        beta_sup=nf.beta_sup, D=D, eps=eps, C1_trivial=-two_eps_B / nf.omega, b_harmonics=nf.b_harmonics)
    logger.info("Quasi-periodic construction: C1=%.4g alpha=%.4g mu=%.4g omega_L=%.6g", C1, alpha, mu, omega_L)
    return construction


def qp_waveform(construction: QpConstruction, t, params: PhysicalParams = DEFAULT_PARAMS):
    """
    Libration z(t) = (alpha/2) sin(omega t) - eps sum_k A_k cos((k-3) n t) / ((k-3)^2 n^2 - omega^2)
    and its derivative divided by n.

    :return: (z, zdot_over_n), arrays shaped like t.
    """
    t = np.asarray(t, dtype=float)
    omega = construction.omega
    half = construction.slow_amplitude
    z = half * np.sin(omega * t)
    zdot = half * omega * np.cos(omega * t)
    for k, a_k in params.A.items():
        if k == K0 or a_k == 0.0:
            continue
        weight = (params.S * a_k) / (((k - K0) * params.n) ** 2 - omega ** 2)
        freq = (k - K0) * params.n
        z = z - construction.eps * weight * np.cos(freq * t)
        zdot = zdot + construction.eps * weight * freq * np.sin(freq * t)
    return z, zdot / params.n


def second_order_averages(construction: QpConstruction, params: PhysicalParams = DEFAULT_PARAMS,
                          grid: int = 512) -> Dict[str, float]:
    """
    The eight secular averages of the second approximation (cos and sin projections).

    Of these only I_2c2 (the tidal term) and I_2s1, I_2s3, I_2s4 survive; the others
    vanish by parity or because their integrand is a psi1-derivative.
    """
    alpha = construction.alpha
    a = construction.a_root
    psi = TWO_PI * np.arange(grid) / grid
    psi1 = psi[:, None]
    psi2 = psi[None, :]
    beta = _beta(psi2, construction.beta_harmonics)
    b = _b(psi2, construction.b_harmonics)
    inner = alpha * np.sin(psi1) + beta
    phase = sum(coeff * np.sin(i * psi2 - alpha * np.sin(psi1) - beta)
                for i, coeff in _sideband_coefficients(params).items())
    tidal = phi_torque(a * np.cos(psi1) + b, params)
    A3 = params.coefficient(K0)
    out = {}
    for name, weight in (('c', np.cos(psi1)), ('s', np.sin(psi1))):
        out[f'I_2{name}1'] = float(np.mean(2.0 * weight * phase))
        out[f'I_2{name}2'] = float(np.mean(-2.0 * params.gamma * weight * tidal))
        out[f'I_2{name}3'] = float(np.mean(-construction.mu * weight * inner))
        out[f'I_2{name}4'] = float(np.mean(A3 / 3.0 * weight * inner ** 3))
    # the uniform grid under-resolves the k = 3 spike; the cos projection is -2 gamma I2(a)
    out['I_2c2'] = -2.0 * params.gamma * I2(a, params)
    return out


def attractor_distance(construction: QpConstruction, z: np.ndarray, zdot_over_n: np.ndarray,
                       params: PhysicalParams = DEFAULT_PARAMS, samples: int = 4096) -> Tuple[float, float]:
    """
    Symmetric Hausdorff distance between the analytic stroboscopic curve and measured points.

    At t = k T0 every fast term of qp_waveform returns to its t = 0 value, so the analytic
    stroboscopic curve is the slow ellipse shifted by z(0); it is sampled densely in the slow phase.

    :return: (distance, diameter of the analytic curve), both in (z, zdot/n) units.
    """
    z0, _ = qp_waveform(construction, 0.0, params)
    phase = TWO_PI * np.arange(samples) / samples
    half = construction.slow_amplitude
    za = z0 + half * np.sin(phase)
    zda = half * construction.omega * np.cos(phase) / params.n
    analytic = np.column_stack([za, zda])
    measured = np.column_stack([np.asarray(z, dtype=float), np.asarray(zdot_over_n, dtype=float)])
    distance = max(directed_hausdorff(analytic, measured)[0], directed_hausdorff(measured, analytic)[0])
    diameter = float(np.max(np.ptp(analytic, axis=0)))
    return distance, diameter
