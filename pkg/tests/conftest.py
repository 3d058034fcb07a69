import numpy as np
import pytest

from rei_qnd.cavity.params import CouplingRates, load_system
from rei_qnd.measurement.protocol import DephasingPolicy


@pytest.fixture
def rng():
    return np.random.default_rng(20261018)


@pytest.fixture
def normalized_rates():
    """g = 1, kappa = 10 g, gamma = 0.01 g, Delta = 20 g."""
    return CouplingRates.normalized()


@pytest.fixture(scope="session")
def demonstrated():
    return load_system("nd_yvo4_demonstrated")


@pytest.fixture(scope="session")
def subkelvin():
    return load_system("nd_yvo4_subkelvin")


@pytest.fixture(scope="session")
def theoretical_q():
    return load_system("nd_yvo4_theoretical_q")


@pytest.fixture
def policy_for():
    def build(system, alpha=2.0):
        return DephasingPolicy(system.spin.spin_dephasing_rate, alpha)
    return build


