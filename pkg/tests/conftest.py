import numpy as np
import pytest

from src.models.schema import CostModel, EnergyModel, IdfVector, Potential

COSTS = {
    "p4/3": CostModel.p_power(4.0 / 3.0),
    "p2": CostModel.p_power(2.0),
    "p7": CostModel.p_power(7.0),
    "relativistic": CostModel.relativistic(1.0),
}


def jittered_grid(rng: np.random.Generator, k: int, a: float = 0.0, b: float = 1.0, jitter: float = 0.2) -> IdfVector:
    """Equispaced grid with interior points moved by at most jitter * (b - a) / k."""
    values = np.linspace(a, b, k + 1)
    values[1:-1] += rng.uniform(-jitter, jitter, k - 1) * (b - a) / k
    values[0], values[-1] = a, b
    return IdfVector(a=a, b=b, values=values)


def energies(a: float = 0.0, b: float = 1.0):
    flat = Potential.constant(domain=(a, b))
    bowl = Potential.quadratic(2.0, center=0.5 * (a + b), domain=(a, b))
    return {
        "boltzmann": EnergyModel.boltzmann(flat),
        "renyi": EnergyModel.renyi(5.0 / 3.0, flat),
        "boltzmann_quadratic": EnergyModel.boltzmann(bowl),
        "renyi_quadratic": EnergyModel.renyi(5.0 / 3.0, bowl),
    }


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def unit_boltzmann():
    return EnergyModel.boltzmann(Potential.constant(domain=(0.0, 1.0)))


@pytest.fixture
def k4_prev():
    return IdfVector(a=0.0, b=1.0, values=[0.0, 0.1, 0.3, 0.6, 1.0])
