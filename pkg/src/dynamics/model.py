"""
Torque model: the Andrade tidal kernel, the tidal function F and its derivative,
the triaxial Fourier series G and the full spin acceleration.

The scalar kernels are compiled with numba and shared with the integrator.
Public functions accept scalars or arrays.
"""
import math
from typing import Union

import numpy as np
from numba import njit

from .params import (PhysicalParams, SpinState, DEFAULT_PARAMS, P_N, P_ZETA, P_ETA, P_ALPHA,
                     P_TAU_M, P_CALA, P_S, P_LAM, P_SIN_C, P_COS_C, P_A0, K_MIN)

ArrayLike = Union[float, np.ndarray]


@njit(cache=True)
def _xi(omega, p):
    if omega == 0.0:
        return 0.0
    u = abs(omega)
    w = u ** (1.0 - p[P_ALPHA])
    im = -1.0 / p[P_TAU_M] - w * p[P_SIN_C]
    re = u + w * p[P_COS_C]
    g = re + p[P_CALA] * u
    val = im * u / (g * g + im * im)
    return val if omega > 0.0 else -val


@njit(cache=True)
def _xi_prime(omega, p):
    # even in omega; the limit at 0 is 1/I(0) = -tau_M
    if omega == 0.0:
        return -p[P_TAU_M]
    u = abs(omega)
    alpha = p[P_ALPHA]
    w = u ** (1.0 - alpha)
    dw = (1.0 - alpha) * w / u
    im = -1.0 / p[P_TAU_M] - w * p[P_SIN_C]
    dim = -dw * p[P_SIN_C]
    g = u + w * p[P_COS_C] + p[P_CALA] * u
    dg = 1.0 + dw * p[P_COS_C] + p[P_CALA]
    num = im * u
    dnum = im + u * dim
    den = g * g + im * im
    dden = 2.0 * g * dg + 2.0 * im * dim
    return (dnum * den - num * dden) / (den * den)


@njit(cache=True)
def _tidal_F(theta_dot, p):
    n = p[P_N]
    total = 0.0
    for k in range(1, 10):
        a_k = p[P_A0 + k - K_MIN]
        if a_k != 0.0:
            total += a_k * a_k * _xi(k * n - 2.0 * theta_dot, p)
    return total


@njit(cache=True)
def _tidal_F_prime(theta_dot, p):
    n = p[P_N]
    total = 0.0
    for k in range(1, 10):
        a_k = p[P_A0 + k - K_MIN]
        if a_k != 0.0:
            total += a_k * a_k * _xi_prime(k * n - 2.0 * theta_dot, p)
    return -2.0 * total


@njit(cache=True)
def _triaxial(theta, t, p):
    """Returns (G, dG/dtheta) by rotating exp(i(2theta - k n t)) through k = -2..8."""
    nt = p[P_N] * t
    cn = math.cos(nt)
    sn = math.sin(nt)
    arg = 2.0 * theta + 2.0 * nt
    c = math.cos(arg)
    s = math.sin(arg)
    g = 0.0
    dg = 0.0
    for k in range(-2, 9):
        a_k = p[P_A0 + k - K_MIN]
        if k != 3:
            a_k *= p[P_S]
        g += a_k * s
        dg += 2.0 * a_k * c
        c, s = c * cn + s * sn, s * cn - c * sn
    return g, dg


@njit(cache=True)
def _acceleration(theta, theta_dot, t, p):
    g, _ = _triaxial(theta, t, p)
    return -p[P_ZETA] * g - p[P_LAM] * p[P_ETA] * _tidal_F(theta_dot, p)


@njit(cache=True)
def _map_xi(x, p, out, derivative):
    for i in range(x.shape[0]):
        out[i] = _xi_prime(x[i], p) if derivative else _xi(x[i], p)


@njit(cache=True)
def _map_tidal(x, p, out, derivative):
    for i in range(x.shape[0]):
        out[i] = _tidal_F_prime(x[i], p) if derivative else _tidal_F(x[i], p)


def _vectorized(kernel, x, params, derivative):
    arr = np.asarray(x, dtype=np.float64)
    flat = np.ascontiguousarray(arr.ravel())
    out = np.empty_like(flat)
    kernel(flat, params.packed, out, derivative)
    if arr.ndim == 0:
        return float(out[0])
    return out.reshape(arr.shape)


def xi_kernel(omega: ArrayLike, params: PhysicalParams = DEFAULT_PARAMS) -> ArrayLike:
    """
    Andrade tidal kernel Xi(omega), odd in omega with Xi(0) = 0.

    :param omega: Tidal frequency in rad/yr (scalar or array).
    """
    return _vectorized(_map_xi, omega, params, False)


def xi_kernel_prime(omega: ArrayLike, params: PhysicalParams = DEFAULT_PARAMS) -> ArrayLike:
    """Analytic derivative of xi_kernel; even in omega, equal to -tau_M at omega = 0."""
    return _vectorized(_map_xi, omega, params, True)


def tidal_F(theta_dot: ArrayLike, params: PhysicalParams = DEFAULT_PARAMS) -> ArrayLike:
    """
    Tidal function F(theta_dot) = sum_{k=1..9} A_k^2 Xi(k n - 2 theta_dot).

    :param theta_dot: Spin rate in rad/yr (scalar or array).
    """
    return _vectorized(_map_tidal, theta_dot, params, False)


def tidal_F_prime(theta_dot: ArrayLike, params: PhysicalParams = DEFAULT_PARAMS) -> ArrayLike:
    """Analytic dF/dtheta_dot via the chain rule on Xi."""
    return _vectorized(_map_tidal, theta_dot, params, True)


def triaxial_G(theta: ArrayLike, t: ArrayLike, params: PhysicalParams = DEFAULT_PARAMS) -> ArrayLike:
    """
    Triaxial series G = A_3 sin(2 theta - 3 n t) + S * sum_{k != 3} A_k sin(2 theta - k n t).
    """
    theta = np.asarray(theta, dtype=float)
    t = np.asarray(t, dtype=float)
    total = np.zeros(np.broadcast(theta, t).shape)
    for k, a_k in params.A.items():
        weight = a_k if k == 3 else params.S * a_k
        total = total + weight * np.sin(2.0 * theta - k * params.n * t)
    return float(total) if total.ndim == 0 else total


def acceleration(state: SpinState, params: PhysicalParams = DEFAULT_PARAMS) -> float:
    """
    Spin acceleration theta_ddot = -zeta G(theta, t) - lambda eta F(theta_dot) in rad/yr^2.
    """
    return float(_acceleration(state.theta, state.theta_dot, state.t, params.packed))


def gamma_F(theta_dot: ArrayLike, params: PhysicalParams = DEFAULT_PARAMS) -> ArrayLike:
    """gamma * F(theta_dot), the quantity tabulated against resonance spin rates."""
    return params.gamma * tidal_F(theta_dot, params)
