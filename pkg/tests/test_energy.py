import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.polynomial import Polynomial
from pydantic import ValidationError

from src.core.exceptions import EnergyDomainError
from src.models.schema import EnergyModel, IdfVector, Potential
from src.solver.energy import (
    ddh_x,
    dh_x,
    energy_lower_bound,
    h_x,
    kappa_bar,
    potential_eval,
    potential_minimum,
    total_energy,
)
from tests.conftest import energies

BOLTZMANN = EnergyModel.boltzmann()
RENYI = EnergyModel.renyi(5.0 / 3.0)


def test_h_x_values():
    assert h_x(BOLTZMANN, 1.0) == 0.0
    assert h_x(RENYI, 1.0) == pytest.approx(1.5)
    assert h_x(RENYI, 8.0) == pytest.approx(0.375)
    assert h_x(BOLTZMANN, math.e) == pytest.approx(-1.0)


def test_derivative_values():
    assert dh_x(BOLTZMANN, 2.0) == pytest.approx(-0.5)
    assert dh_x(RENYI, 1.0) == pytest.approx(-1.0)
    assert ddh_x(RENYI, 1.0) == pytest.approx(5.0 / 3.0)
    assert ddh_x(BOLTZMANN, 2.0) == pytest.approx(0.25)


@pytest.mark.parametrize("model", [BOLTZMANN, RENYI, EnergyModel.renyi(3.0)])
def test_derivatives_match_finite_differences(model):
    for s in np.logspace(-3, 3, 25):
        h = 1e-6 * s
        fd1 = (h_x(model, s + h) - h_x(model, s - h)) / (2 * h)
        fd2 = (dh_x(model, s + h) - dh_x(model, s - h)) / (2 * h)
        assert dh_x(model, s) == pytest.approx(fd1, rel=1e-6)
        assert ddh_x(model, s) == pytest.approx(fd2, rel=1e-6)


def test_domain_errors():
    with pytest.raises(EnergyDomainError):
        h_x(BOLTZMANN, 0.0)
    with pytest.raises(EnergyDomainError):
        dh_x(RENYI, np.array([1.0, -2.0]))


def test_potential_eval():
    assert potential_eval(Potential.constant(3.0), 0.7) == (3.0, 0.0, 0.0)
    bowl = Potential.quadratic(2.0, center=0.0, domain=(-4.0, 4.0))
    assert potential_eval(bowl, 3.0) == pytest.approx((9.0, 6.0, 2.0))
    coeffs = [1.0, -2.0, 0.5, 0.0, 0.25]
    poly = Potential.polynomial(coeffs, domain=(-1.0, 1.0))
    x = np.linspace(-1.0, 1.0, 9)
    ref = Polynomial(coeffs)
    v, v1, v2 = potential_eval(poly, x)
    assert np.allclose(v, ref(x))
    assert np.allclose(v1, ref.deriv(1)(x))
    assert np.allclose(v2, ref.deriv(2)(x))


def test_nonconvex_potentials_are_rejected():
    with pytest.raises(ValidationError):
        Potential.polynomial([0.0, 0.0, -1.0])
    with pytest.raises(ValidationError):
        Potential.quadratic(-0.5)
    with pytest.raises(ValidationError):
        Potential.polynomial([0.0, 0.0, 0.0, 1.0], domain=(-1.0, 1.0))
    # x^3 is convex once the domain excludes negatives
    Potential.polynomial([0.0, 0.0, 0.0, 1.0], domain=(0.0, 1.0))


def test_potential_summaries():
    bowl = Potential.quadratic(3.0, center=0.25, domain=(0.0, 1.0))
    assert kappa_bar(bowl) == 3.0
    assert potential_minimum(bowl) == pytest.approx(0.0, abs=1e-15)
    assert kappa_bar(Potential.constant(1.0)) == 0.0
    assert potential_minimum(Potential.polynomial([0.0, 1.0], domain=(2.0, 5.0))) == pytest.approx(2.0)
    assert Potential.quadratic(0.0).is_constant
    assert not bowl.is_constant


def test_total_energy_of_uniform_density():
    assert total_energy(BOLTZMANN, IdfVector.equispaced(0.0, 1.0, 100)) == pytest.approx(0.0, abs=1e-13)
    flat = EnergyModel.boltzmann(Potential.constant(domain=(-4.0, 4.0)))
    assert total_energy(flat, IdfVector.equispaced(-4.0, 4.0, 1000)) == pytest.approx(-math.log(8.0), rel=1e-12)


def test_total_energy_direct_sum(rng):
    model = energies()["renyi_quadratic"]
    values = np.concatenate(([0.0], np.sort(rng.uniform(0.0, 1.0, 3)), [1.0]))
    k = 4
    expected = 0.0
    for i in range(k):
        s = k * (values[i + 1] - values[i])
        expected += s ** (1.0 - model.m) / (model.m - 1.0) / k
    for x in values:
        expected += (x - 0.5) ** 2 / k
    assert total_energy(model, values) == pytest.approx(expected, rel=1e-14)


def test_total_energy_is_infinite_off_the_cone():
    assert total_energy(BOLTZMANN, np.array([0.0, 0.5, 0.5, 1.0])) == math.inf
    assert total_energy(BOLTZMANN, np.array([0.0, 0.6, 0.4, 1.0])) == math.inf


@st.composite
def feasible_vectors(draw, a=0.0, b=1.0):
    k = draw(st.integers(min_value=2, max_value=30))
    weights = draw(st.lists(st.floats(min_value=1e-3, max_value=1.0), min_size=k, max_size=k))
    gaps = np.array(weights) / np.sum(weights) * (b - a)
    values = a + np.concatenate(([0.0], np.cumsum(gaps)))
    values[-1] = b
    return values


@settings(max_examples=200, deadline=None)
@given(values=feasible_vectors(), name=st.sampled_from(list(energies())))
def test_jensen_lower_bound(values, name):
    model = energies()[name]
    k = values.size - 1
    assert total_energy(model, values) >= energy_lower_bound(model, 0.0, 1.0, k) - 1e-12


@settings(max_examples=100, deadline=None)
@given(x=feasible_vectors(), y=feasible_vectors(), lam=st.floats(min_value=0.0, max_value=1.0), name=st.sampled_from(list(energies())))
def test_energy_is_convex_along_segments(x, y, lam, name):
    if x.size != y.size:
        return
    model = energies()[name]
    mix = (1 - lam) * x + lam * y
    mix[0], mix[-1] = 0.0, 1.0
    lhs = total_energy(model, mix)
    rhs = (1 - lam) * total_energy(model, x) + lam * total_energy(model, y)
    assert lhs <= rhs + 1e-9 * (1.0 + abs(rhs))


def test_energy_lower_bound_values():
    assert energy_lower_bound(BOLTZMANN, 0.0, 1.0, 10) == 0.0
    flat = EnergyModel.boltzmann(Potential.constant(2.0, domain=(-4.0, 4.0)))
    assert energy_lower_bound(flat, -4.0, 4.0, 4) == pytest.approx(-math.log(8.0) + 1.25 * 2.0)
