import math
import logging
from typing import NamedTuple, Optional, Union
import numpy as np

from src.core.exceptions import CostDomainError
from src.models.schema import CostModel

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]


class GrowthEnvelope(NamedTuple):
    alpha: float
    beta: float
    p: float


def _out(values: np.ndarray, like: ArrayLike) -> ArrayLike:
    return float(values) if np.ndim(like) == 0 else values


def _ratio(model: CostModel, s: ArrayLike) -> np.ndarray:
    return np.asarray(s, dtype=float) / model.gamma


def cost_value(model: CostModel, s: ArrayLike) -> ArrayLike:
    """c(s); +inf outside the domain of a relativistic cost."""
    s_arr = np.asarray(s, dtype=float)
    if model.kind == "p_power":
        return _out(np.abs(s_arr) ** model.p / model.p, s)
    z = _ratio(model, s_arr)
    inside = np.abs(z) <= 1.0
    zc = np.where(inside, z, 0.0)
    # gamma * (1 - sqrt(1 - z^2)) without the cancellation near z = 0
    value = model.gamma * zc * zc / (1.0 + np.sqrt((1.0 - zc) * (1.0 + zc)))
    return _out(np.where(inside, value, np.inf), s)


def cost_prime(model: CostModel, s: ArrayLike) -> ArrayLike:
    s_arr = np.asarray(s, dtype=float)
    if model.kind == "p_power":
        return _out(np.sign(s_arr) * np.abs(s_arr) ** (model.p - 1.0), s)
    z = _ratio(model, s_arr)
    if np.any(np.abs(z) >= 1.0):
        bad = int(np.argmax(np.abs(np.atleast_1d(z)) >= 1.0))
        raise CostDomainError(f"c' is infinite for |s| >= gamma={model.gamma} (index {bad}, s={np.atleast_1d(s_arr)[bad]!r})")
    return _out(z / np.sqrt((1.0 - z) * (1.0 + z)), s)


def cost_second(model: CostModel, s: ArrayLike) -> ArrayLike:
    s_arr = np.asarray(s, dtype=float)
    if model.kind == "p_power":
        if model.p < 2.0 and np.any(s_arr == 0.0):
            raise CostDomainError(f"c'' is unbounded at s=0 for p={model.p} < 2")
        return _out((model.p - 1.0) * np.abs(s_arr) ** (model.p - 2.0), s)
    z = _ratio(model, s_arr)
    if np.any(np.abs(z) >= 1.0):
        raise CostDomainError(f"c'' is infinite for |s| >= gamma={model.gamma}")
    return _out(((1.0 - z) * (1.0 + z)) ** -1.5 / model.gamma, s)


def dual_prime(model: CostModel, r: ArrayLike) -> ArrayLike:
    """(c*)' = (c')^{-1}; for the relativistic cost the result stays strictly inside (-gamma, gamma)."""
    r_arr = np.asarray(r, dtype=float)
    if model.kind == "p_power":
        return _out(np.sign(r_arr) * np.abs(r_arr) ** (1.0 / (model.p - 1.0)), r)
    limit = np.nextafter(model.gamma, 0.0)
    speed = model.gamma * r_arr / np.hypot(1.0, r_arr)
    return _out(np.clip(speed, -limit, limit), r)


def cost_tilde(model: CostModel, s: ArrayLike) -> ArrayLike:
    """s * c'(s), the dissipation density of the energy inequality; +inf where |s| >= gamma."""
    s_arr = np.asarray(s, dtype=float)
    if model.kind == "p_power":
        return _out(s_arr * np.asarray(cost_prime(model, s_arr)), s)
    z = _ratio(model, s_arr)
    inside = np.abs(z) < 1.0
    zc = np.where(inside, z, 0.0)
    value = s_arr * zc / np.sqrt((1.0 - zc) * (1.0 + zc))
    return _out(np.where(inside, value, np.inf), s)


def growth_envelope(model: CostModel, bound: Optional[float] = None) -> GrowthEnvelope:
    """
    Constants with alpha|s|^p <= s c'(s) <= beta|s|^p.
    For the relativistic cost p = 2 and the constants hold on |s| <= bound,
    which defaults to envelope_bound * gamma.
    """
    if model.kind == "p_power":
        return GrowthEnvelope(1.0, 1.0, model.p)
    rho = model.envelope_bound * model.gamma if bound is None else float(bound)
    if not 0.0 <= rho < model.gamma:
        raise CostDomainError(f"envelope bound must lie in [0, gamma={model.gamma}), got {rho}")
    z = rho / model.gamma
    room = (1.0 - z) * (1.0 + z)
    beta = 1.0 / (model.gamma * math.sqrt(room)) if room > 0.0 else math.inf
    return GrowthEnvelope(1.0 / model.gamma, beta, 2.0)


def curvature_floor(model: CostModel) -> float:
    """inf over the domain of c''."""
    if model.kind == "relativistic":
        return 1.0 / model.gamma
    if model.p == 2.0:
        return 1.0
    return 0.0


def satisfies_curvature_floor(model: CostModel) -> bool:
    return curvature_floor(model) > 0.0


def hessian_speed_floor(model: CostModel, tau: float) -> float:
    """Smallest |s| at which c'' is sampled for the Newton Hessian; nonzero only where c''(0) is unbounded."""
    if model.kind == "p_power" and model.p < 2.0:
        return 1e-3 * tau
    return 0.0
