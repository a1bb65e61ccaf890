"""Parameter and state types of the spin-orbit model."""
import logging
import math
from dataclasses import dataclass, field, asdict, replace
from functools import cached_property
from typing import Dict, Mapping, Optional

import numpy as np
from scipy.special import gamma as gamma_fn

from . import config as C
from ..exceptions import InvalidParameters

logger = logging.getLogger(__name__)

# --- Layout of the packed parameter vector consumed by the compiled kernels ---
P_N = 0
P_ZETA = 1
P_ETA = 2
P_GAMMA = 3
P_ALPHA = 4
P_TAU_M = 5
P_CALA = 6
P_S = 7
P_LAM = 8
P_SIN_C = 9     # tau_A^-alpha * sin(alpha*pi/2) * Gamma(alpha+1)
P_COS_C = 10    # tau_A^-alpha * cos(alpha*pi/2) * Gamma(alpha+1)
P_A0 = 11       # A_k stored at P_A0 + k + 2 for k = -2..9
K_MIN = -2
K_MAX_TIDAL = 9
PACKED_SIZE = P_A0 + (K_MAX_TIDAL - K_MIN + 1)

_FLOAT_KEYS = ('n', 'zeta', 'eta', 'gamma', 'alpha_rheo', 'tau_M', 'tau_A', 'calA', 'S')


@dataclass(frozen=True)
class PhysicalParams:
    """
    Constants of the spin-orbit model in years and radians, plus the S and lambda continuation multipliers.
    """
    n: float = C.MEAN_MOTION
    zeta: float = C.ZETA
    eta: float = C.ETA
    gamma: float = C.GAMMA
    A: Dict[int, float] = field(default_factory=lambda: dict(C.FOURIER_COEFFICIENTS), hash=False)
    alpha_rheo: float = C.ALPHA_RHEO
    tau_M: float = C.TAU_MAXWELL
    tau_A: float = C.TAU_ANDRADE
    calA: float = C.SELF_GRAVITATION
    S: float = C.SIDEBAND_SCALE
    lam: float = C.DISSIPATION_SCALE

    def __post_init__(self):
        coeffs = {int(k): float(v) for k, v in self.A.items()}
        object.__setattr__(self, 'A', coeffs)
        unknown = set(coeffs) - set(C.TRIAXIAL_INDICES)
        if unknown:
            raise InvalidParameters(f"Fourier indices outside -2..8: {sorted(unknown)}")
        if coeffs.get(0, 0.0) != 0.0:
            raise InvalidParameters("A_0 must vanish")
        values = [self.n, self.zeta, self.eta, self.gamma, self.alpha_rheo,
                  self.tau_M, self.tau_A, self.calA, self.S, self.lam, *coeffs.values()]
        if not all(math.isfinite(v) for v in values):
            raise InvalidParameters("All parameters must be finite")
        if self.n <= 0:
            raise InvalidParameters(f"Mean motion must be positive, got {self.n}")
        if self.tau_M <= 0 or self.tau_A <= 0:
            raise InvalidParameters("Rheological times tau_M and tau_A must be positive")
        if not 0.0 < self.alpha_rheo < 1.0:
            raise InvalidParameters(f"Andrade exponent must lie in (0, 1), got {self.alpha_rheo}")
        if self.zeta > 0 and self.eta > 0:
            ratio = self.eta / self.zeta
            if abs(ratio - self.gamma) > 1e-3 * abs(ratio):
                raise InvalidParameters(f"gamma={self.gamma} inconsistent with eta/zeta={ratio:.6g}")
        if any(coeffs.get(k, 0.0) <= 0 for k in range(2, 9)) or coeffs.get(1, 0.0) >= 0:
            logger.debug("Fourier table departs from the tabulated sign pattern: %s", coeffs)

    @property
    def period(self) -> float:
        """Orbital period T0 = 2*pi/n in years."""
        return 2.0 * math.pi / self.n

    def coefficient(self, k: int) -> float:
        return self.A.get(k, 0.0)

    @cached_property
    def packed(self) -> np.ndarray:
        """Flat float64 vector read by the compiled kernels."""
        p = np.zeros(PACKED_SIZE)
        p[P_N] = self.n
        p[P_ZETA] = self.zeta
        p[P_ETA] = self.eta
        p[P_GAMMA] = self.gamma
        p[P_ALPHA] = self.alpha_rheo
        p[P_TAU_M] = self.tau_M
        p[P_CALA] = self.calA
        p[P_S] = self.S
        p[P_LAM] = self.lam
        scale = self.tau_A ** (-self.alpha_rheo) * gamma_fn(self.alpha_rheo + 1.0)
        p[P_SIN_C] = scale * math.sin(self.alpha_rheo * math.pi / 2)
        p[P_COS_C] = scale * math.cos(self.alpha_rheo * math.pi / 2)
        for k, a_k in self.A.items():
            p[P_A0 + k - K_MIN] = a_k
        p.setflags(write=False)
        return p

    def replace(self, **changes) -> 'PhysicalParams':
        return replace(self, **changes)

    def to_dict(self) -> Dict[str, object]:
        d = asdict(self)
        d['lambda'] = d.pop('lam')
        d['A'] = {str(k): v for k, v in sorted(self.A.items())}
        return d

    @classmethod
    def from_mapping(cls, values: Mapping[str, str], base: Optional['PhysicalParams'] = None) -> 'PhysicalParams':
        """
        Builds parameters from `key = value` overrides on top of `base` (defaults when None).

        :param values: Keys n, zeta, eta, gamma, alpha_rheo, tau_M, tau_A, calA, S, lambda, A_-2 ... A_8.
        :raises ValueError: On an unknown key or a non-numeric value.
        """
        base = base or cls()
        changes = {}
        coeffs = dict(base.A)
        for key, raw in values.items():
            try:
                value = float(raw)
            except (TypeError, ValueError):
                raise ValueError(f"Parameter '{key}' is not a number: {raw!r}")
            if key in _FLOAT_KEYS:
                changes[key] = value
            elif key == 'lambda':
                changes['lam'] = value
            elif key.startswith('A_'):
                try:
                    k = int(key[2:])
                except ValueError:
                    raise ValueError(f"Unknown parameter key '{key}'")
                coeffs[k] = value
            else:
                raise ValueError(f"Unknown parameter key '{key}'")
        return replace(base, A=coeffs, **changes)


PARAM_KEYS = frozenset(_FLOAT_KEYS) | {'lambda'} | {f'A_{k}' for k in C.TRIAXIAL_INDICES}


@dataclass(frozen=True)
class SpinState:
    """Sidereal angle theta (rad, unwrapped), spin rate theta_dot (rad/yr) and time t (yr)."""
    theta: float
    theta_dot: float
    t: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.theta) and math.isfinite(self.theta_dot) and math.isfinite(self.t)):
            raise ValueError(f"Non-finite spin state: {self}")

    def wrapped(self) -> float:
        """Angle reduced to [0, 2*pi) for presentation."""
        return self.theta % (2.0 * math.pi)

    def libration(self, omega0: float, n: float) -> float:
        """z = theta - omega0*n*t, folded into (-pi/2, pi/2]."""
        return fold_libration(self.theta - omega0 * n * self.t)


def fold_libration(z):
    """Folds a libration angle into (-pi/2, pi/2] using the pi-periodicity of the field."""
    folded = -(np.mod(np.pi / 2 - np.asarray(z, dtype=float), np.pi) - np.pi / 2)
    return float(folded) if folded.ndim == 0 else folded


DEFAULT_PARAMS = PhysicalParams()
