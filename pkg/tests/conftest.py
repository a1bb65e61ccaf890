import pytest

from src.dynamics.integrator import IntegratorConfig
from src.dynamics.params import PhysicalParams, DEFAULT_PARAMS


@pytest.fixture
def params():
    return DEFAULT_PARAMS


@pytest.fixture
def free_params():
    """No triaxial and no tidal torque: the free rotor."""
    return PhysicalParams(zeta=0.0, eta=0.0)


@pytest.fixture
def conservative_params():
    """Triaxial torque only."""
    return DEFAULT_PARAMS.replace(lam=0.0)


@pytest.fixture
def precise():
    return IntegratorConfig.precise()


@pytest.fixture(autouse=True)
def _no_default_config(monkeypatch):
    monkeypatch.delenv('SPINORBIT_CONFIG_DIR', raising=False)
