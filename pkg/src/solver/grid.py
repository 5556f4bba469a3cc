import logging
from typing import Tuple, Union
import numpy as np
from scipy.integrate import cumulative_trapezoid

from src.core.exceptions import GridError
from src.models.schema import IdfVector, PiecewiseDensity, UniformDensity, TabulatedDensity

logger = logging.getLogger(__name__)

DensitySpec = Union[UniformDensity, TabulatedDensity, PiecewiseDensity]

BISECTION_RTOL = 1e-12


def delta(x: IdfVector) -> np.ndarray:
    """dx_i = k (x_{i+1} - x_i), i = 0..k-1."""
    return x.k * np.diff(x.values)


def delta2(x: IdfVector) -> np.ndarray:
    """d2x_i = k^2 (x_{i+1} - 2x_i + x_{i-1}), i = 1..k-1."""
    return x.k * np.diff(delta(x))


def to_density(x: IdfVector) -> PiecewiseDensity:
    widths = np.diff(x.values)
    return PiecewiseDensity(breakpoints=x.values, cell_values=1.0 / (x.k * widths))


class QuantileTable:
    """
    Cumulative distribution of a piecewise-linear density blended with a uniform floor.
    Within a cell the CDF is the exact quadratic antiderivative of the linear piece.
    """

    def __init__(self, nodes_x: np.ndarray, nodes_u: np.ndarray, a: float, b: float, floor: float):
        self.a, self.b, self.floor = a, b, floor
        self.nodes_x = np.asarray(nodes_x, dtype=float)
        mass = float(np.sum(0.5 * (nodes_u[1:] + nodes_u[:-1]) * np.diff(self.nodes_x)))
        if not mass > 0.0:
            raise GridError("initial density has zero mass")
        self.nodes_u = np.asarray(nodes_u, dtype=float) / mass
        self.cumulative = cumulative_trapezoid(self.nodes_u, self.nodes_x, initial=0.0)
        # the last node closes the distribution exactly
        self.cumulative /= self.cumulative[-1]

    def _spec_cdf(self, x: np.ndarray) -> np.ndarray:
        xn, un, cum = self.nodes_x, self.nodes_u, self.cumulative
        j = np.clip(np.searchsorted(xn, x, side="right") - 1, 0, xn.size - 2)
        h = xn[j + 1] - xn[j]
        t = np.clip(x - xn[j], 0.0, h)
        slope = np.divide(un[j + 1] - un[j], h, out=np.zeros_like(h), where=h > 0)
        inside = cum[j] + un[j] * t + 0.5 * slope * t * t
        return np.where(x < xn[0], 0.0, np.where(x >= xn[-1], 1.0, np.minimum(inside, 1.0)))

    def cdf(self, x: np.ndarray) -> np.ndarray:
        uniform = (x - self.a) / (self.b - self.a)
        return (1.0 - self.floor) * self._spec_cdf(x) + self.floor * uniform

    def quantiles(self, levels: np.ndarray) -> np.ndarray:
        """inf{x : F(x) >= q} by vectorized bisection on [a, b]."""
        lo = np.full(levels.shape, self.a, dtype=float)
        hi = np.full(levels.shape, self.b, dtype=float)
        tol = BISECTION_RTOL * (self.b - self.a)
        while np.max(hi - lo, initial=0.0) > tol:
            mid = 0.5 * (lo + hi)
            below = self.cdf(mid) < levels
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        return hi


def _spec_nodes(u: DensitySpec) -> Tuple[np.ndarray, np.ndarray]:
    if isinstance(u, (UniformDensity, TabulatedDensity, PiecewiseDensity)):
        return u.nodes()
    raise GridError(f"unsupported density specification {type(u).__name__}")


def from_density(u: DensitySpec, k: int, a: float, b: float, floor: float = 1e-3) -> IdfVector:
    """
    Mass-grid quantiles x_i = inf{x : F(x) = i/k} of u blended with a uniform floor of mass `floor`.
    Endpoints are pinned to a and b exactly.
    """
    if k < 2:
        raise GridError(f"k must be >= 2, got {k}")
    if not 0.0 <= floor <= 1e-3:
        raise GridError(f"floor must lie in [0, 1e-3], got {floor}")
    nodes_x, nodes_u = _spec_nodes(u)
    if nodes_x[0] < a or nodes_x[-1] > b:
        raise GridError(f"density support [{nodes_x[0]}, {nodes_x[-1]}] is not inside [{a}, {b}]")
    table = QuantileTable(nodes_x, nodes_u, a, b, floor)
    interior = table.quantiles(np.arange(1, k) / k)
    values = np.concatenate(([a], interior, [b]))
    gaps = np.diff(values)
    if not np.all(gaps > 0):
        first = int(np.argmax(~(gaps > 0)))
        raise GridError(f"quantiles collapse at index {first}; the density has vacuum, raise the floor")
    logger.debug(f"from_density: k={k}, floor={floor}, min gap={gaps.min():.3e}")
    return IdfVector(a=a, b=b, values=values)


def _same_grid(x: IdfVector, y: IdfVector, need_same_k: bool):
    if x.a != y.a or x.b != y.b:
        raise GridError(f"domains differ: [{x.a}, {x.b}] vs [{y.a}, {y.b}]")
    if need_same_k and x.k != y.k:
        raise GridError(f"dimension mismatch: k={x.k} vs k={y.k}")


def l1_idf_distance(x: IdfVector, y: IdfVector) -> float:
    """(1/k) sum_{i=0}^{k} |x_i - y_i|."""
    _same_grid(x, y, need_same_k=True)
    return float(np.sum(np.abs(x.values - y.values))) / x.k


def _cell_of(breaks: np.ndarray, points: np.ndarray) -> np.ndarray:
    return np.clip(np.searchsorted(breaks, points, side="right") - 1, 0, breaks.size - 2)


def idf_function_distance(x: IdfVector, y: IdfVector) -> float:
    """Exact integral over [0, 1] of |X_x - X_y| for the piecewise-constant IDFs, X(xi) = x_i on [i/k, (i+1)/k)."""
    _same_grid(x, y, need_same_k=False)
    xi_x = np.arange(x.k + 1) / x.k
    xi_y = np.arange(y.k + 1) / y.k
    merged = np.union1d(xi_x, xi_y)
    left, width = merged[:-1], np.diff(merged)
    gap = np.abs(x.values[_cell_of(xi_x, left)] - y.values[_cell_of(xi_y, left)])
    return float(np.sum(gap * width))


def l1_density_distance(x: IdfVector, y: IdfVector) -> float:
    """Exact L1 distance of the two piecewise-constant densities on the merged breakpoints."""
    _same_grid(x, y, need_same_k=False)
    ux, uy = to_density(x).cell_values, to_density(y).cell_values
    merged = np.union1d(x.values, y.values)
    mids, width = 0.5 * (merged[1:] + merged[:-1]), np.diff(merged)
    gap = np.abs(ux[_cell_of(x.values, mids)] - uy[_cell_of(y.values, mids)])
    return float(np.sum(gap * width))
