import numpy as np
import pytest

from src.analytics.oracle import CoordinateOracle, brute_force_candidates, brute_force_step
from src.models.schema import CostModel, EnergyModel, IdfVector, JkoConfig, Potential
from src.solver.jko import jko_step, phi
from tests.conftest import COSTS, energies

P2 = CostModel.p_power(2.0)


def test_stationary_point_is_recovered(unit_boltzmann):
    prev = IdfVector.equispaced(0.0, 1.0, 4)
    best = brute_force_step(P2, unit_boltzmann, 0.05, prev, n_starts=4)
    assert np.allclose(best.values, prev.values, rtol=0.0, atol=1e-5)


def test_newton_agrees_with_brute_force(k4_prev, unit_boltzmann):
    tau = 0.05
    x, _ = jko_step(P2, unit_boltzmann, JkoConfig(tau=tau, t_end=tau), k4_prev)
    best = brute_force_step(P2, unit_boltzmann, tau, k4_prev)
    assert np.allclose(x.values, best.values, rtol=0.0, atol=1e-4)
    assert phi(P2, unit_boltzmann, tau, k4_prev, x) <= phi(P2, unit_boltzmann, tau, k4_prev, best) + 1e-8


def test_random_starts_share_one_minimizer(k4_prev, unit_boltzmann):
    candidates = brute_force_candidates(P2, unit_boltzmann, 0.05, k4_prev, n_starts=20, seed=7)
    stacked = np.vstack([c.values for c in candidates])
    assert np.max(stacked.max(axis=0) - stacked.min(axis=0)) <= 1e-5


def test_relativistic_starts_are_feasible(k4_prev, unit_boltzmann):
    oracle = CoordinateOracle(CostModel.relativistic(1.0), unit_boltzmann, 0.01, k4_prev)
    rng = np.random.default_rng(0)
    for _ in range(50):
        start = oracle.random_start(rng)
        assert np.all(np.diff(start) > 0)
        assert np.max(np.abs(start - k4_prev.values)) < 0.01


def test_oracle_is_limited_to_small_grids(unit_boltzmann):
    with pytest.raises(ValueError):
        CoordinateOracle(P2, unit_boltzmann, 0.05, IdfVector.equispaced(0.0, 1.0, 7))


@pytest.mark.slow
def test_newton_matches_brute_force_on_random_instances():
    rng = np.random.default_rng(42)
    cost_names, energy_names = list(COSTS), list(energies())
    for trial in range(25):
        cost = COSTS[cost_names[trial % len(cost_names)]]
        energy = energies()[energy_names[rng.integers(len(energy_names))]]
        interior = np.sort(rng.uniform(0.05, 0.95, 3))
        while np.min(np.diff(np.concatenate(([0.0], interior, [1.0])))) < 0.05:
            interior = np.sort(rng.uniform(0.05, 0.95, 3))
        prev = IdfVector.from_interior(0.0, 1.0, interior)
        tau = float(rng.uniform(0.01, 0.1))
        x, _ = jko_step(cost, energy, JkoConfig(tau=tau, t_end=tau), prev)
        best = brute_force_step(cost, energy, tau, prev, n_starts=6, seed=trial)
        assert np.allclose(x.values, best.values, rtol=0.0, atol=1e-4), (trial, cost.kind, energy)
        assert phi(cost, energy, tau, prev, x) <= phi(cost, energy, tau, prev, best) + 1e-8


def test_quadratic_confinement_moves_mass_toward_center():
    energy = EnergyModel.boltzmann(Potential.quadratic(4.0, center=0.5, domain=(0.0, 1.0)))
    prev = IdfVector(a=0.0, b=1.0, values=[0.0, 0.1, 0.2, 0.3, 1.0])
    best = brute_force_step(P2, energy, 0.05, prev, n_starts=4)
    x, _ = jko_step(P2, energy, JkoConfig(tau=0.05, t_end=0.05), prev)
    assert np.allclose(x.values, best.values, rtol=0.0, atol=1e-4)
