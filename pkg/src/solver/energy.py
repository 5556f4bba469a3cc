import logging
from typing import Tuple, Union
import numpy as np
from numpy.polynomial import Polynomial

from src.core.exceptions import EnergyDomainError
from src.models.schema import EnergyModel, Potential, IdfVector

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]


def _out(values: np.ndarray, like: ArrayLike) -> ArrayLike:
    return float(values) if np.ndim(like) == 0 else values


def _positive(s: ArrayLike) -> np.ndarray:
    s_arr = np.asarray(s, dtype=float)
    if np.any(~(s_arr > 0.0)):
        bad = int(np.argmax(~(np.atleast_1d(s_arr) > 0.0)))
        raise EnergyDomainError(f"h_X needs s > 0; got s={np.atleast_1d(s_arr)[bad]!r} at index {bad} (non-monotone IDF)")
    return s_arr


def h_x(model: EnergyModel, s: ArrayLike) -> ArrayLike:
    """h_X(s) = s h(1/s); the Boltzmann case drops the additive constant."""
    s_arr = _positive(s)
    if model.m == 1.0:
        return _out(-np.log(s_arr), s)
    return _out(s_arr ** (1.0 - model.m) / (model.m - 1.0), s)


def dh_x(model: EnergyModel, s: ArrayLike) -> ArrayLike:
    return _out(-(_positive(s) ** -model.m), s)


def ddh_x(model: EnergyModel, s: ArrayLike) -> ArrayLike:
    return _out(model.m * _positive(s) ** (-model.m - 1.0), s)


def _polynomial(pot: Potential) -> Polynomial:
    if pot.kind == "polynomial":
        return Polynomial(pot.coefficients)
    if pot.kind == "quadratic":
        w = pot.coefficients[0]
        # w/2 (x - c)^2 expanded
        return Polynomial([0.5 * w * pot.center ** 2, -w * pot.center, 0.5 * w])
    return Polynomial([pot.coefficients[0]])


def potential_eval(pot: Potential, x: ArrayLike) -> Tuple[ArrayLike, ArrayLike, ArrayLike]:
    """(v, v', v'') at x."""
    x_arr = np.asarray(x, dtype=float)
    if pot.kind == "quadratic":
        w = pot.coefficients[0]
        shifted = x_arr - pot.center
        return _out(0.5 * w * shifted ** 2, x), _out(w * shifted, x), _out(np.full_like(x_arr, w), x)
    poly = _polynomial(pot)
    return _out(poly(x_arr), x), _out(poly.deriv(1)(x_arr), x), _out(poly.deriv(2)(x_arr), x)


def _domain_samples(pot: Potential, n: int = 1024) -> np.ndarray:
    lo, hi = pot.domain
    return np.linspace(lo, hi, n)


def kappa_bar(pot: Potential) -> float:
    """max v'' on the potential's domain."""
    if pot.kind == "constant":
        return 0.0
    if pot.kind == "quadratic":
        return float(pot.coefficients[0])
    _, _, v2 = potential_eval(pot, _domain_samples(pot))
    return float(np.max(v2))


def potential_minimum(pot: Potential) -> float:
    """min v on the domain: critical points of the polynomial plus the endpoints."""
    lo, hi = pot.domain
    if pot.kind == "constant":
        return float(pot.coefficients[0])
    poly = _polynomial(pot)
    candidates = [lo, hi]
    if poly.degree() >= 2:
        roots = poly.deriv(1).roots()
        candidates += [float(r.real) for r in np.atleast_1d(roots) if abs(r.imag) < 1e-12 and lo <= r.real <= hi]
    return float(np.min(poly(np.array(candidates))))


def potential_energy(pot: Potential, values: np.ndarray) -> float:
    k = values.size - 1
    v, _, _ = potential_eval(pot, values)
    return float(np.sum(v)) / k


def total_energy(model: EnergyModel, x: Union[IdfVector, np.ndarray]) -> float:
    """
    H_m(x) = (1/k) sum h_X(dx_i) + (1/k) sum v(x_i).
    Returns +inf if some gap is not positive.
    """
    values = x.values if isinstance(x, IdfVector) else np.asarray(x, dtype=float)
    k = values.size - 1
    dx = k * np.diff(values)
    if np.any(~(dx > 0.0)):
        return float("inf")
    return float(np.sum(h_x(model, dx))) / k + potential_energy(model.potential, values)


def energy_lower_bound(model: EnergyModel, a: float, b: float, k: int) -> float:
    """Jensen bound h_X(b-a) + ((k+1)/k) min v, valid for every feasible vector on [a, b]."""
    return float(h_x(model, b - a)) + (k + 1) / k * potential_minimum(model.potential)
