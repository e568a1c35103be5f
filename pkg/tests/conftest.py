import numpy as np
import pytest

from ergovol.model import MarketSpec, build_ergodic_measure, preset


@pytest.fixture(scope="session")
def ou_spec():
    return preset("fouque_ou")


@pytest.fixture(scope="session")
def ou_measure(ou_spec):
    return build_ergodic_measure(ou_spec)


@pytest.fixture(scope="session")
def heston_spec():
    # xi*mu > 1/2 keeps the variance process away from the origin so the
    # regenerative-cycle machinery is on solid ground
    return preset("heston_log", xi=2.0, mu=0.3, rho=-0.6)


@pytest.fixture(scope="session")
def heston_measure(heston_spec):
    return build_ergodic_measure(heston_spec)


@pytest.fixture(scope="session")
def market():
    return MarketSpec(spot_log=0.0, rate=0.02, maturity=1.0)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20260826)
