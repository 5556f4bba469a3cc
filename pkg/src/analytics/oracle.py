import logging
from typing import List, Optional
import numpy as np
from scipy.optimize import minimize_scalar

from src.models.schema import CostModel, EnergyModel, IdfVector
from src.solver.jko import JkoObjective

logger = logging.getLogger(__name__)

MAX_ORACLE_K = 6


class CoordinateOracle:
    """
    Independent minimizer of the per-step objective for small k: coordinate-wise
    bounded Brent refinement over the interior points, restarted from random feasible vectors.
    """

    def __init__(self, cost: CostModel, energy: EnergyModel, tau: float, x_prev: IdfVector,
                 sweep_tol: float = 1e-12, max_sweeps: int = 5000):
        if x_prev.k > MAX_ORACLE_K:
            raise ValueError(f"the brute-force oracle is limited to k <= {MAX_ORACLE_K}, got k={x_prev.k}")
        self.objective = JkoObjective(cost, energy, tau, x_prev)
        self.cost = cost
        self.tau = tau
        self.prev = x_prev.values
        self.sweep_tol = sweep_tol
        self.max_sweeps = max_sweeps
        self.xatol = 1e-14 * (x_prev.b - x_prev.a)

    def random_start(self, rng: np.random.Generator) -> np.ndarray:
        prev = self.prev
        target = np.concatenate(([prev[0]], np.sort(rng.uniform(prev[0], prev[-1], prev.size - 2)), [prev[-1]]))
        if not self.cost.is_flux_limiting:
            return target
        # convex combination with x_prev keeps monotonicity and stays within half the flux limit
        reach = float(np.max(np.abs(target - prev)))
        weight = min(1.0, 0.5 * self.cost.gamma * self.tau / reach) if reach > 0 else 0.0
        start = prev + weight * (target - prev)
        start[0], start[-1] = prev[0], prev[-1]
        return start

    def _bounds(self, x: np.ndarray, j: int):
        lo, hi = x[j - 1], x[j + 1]
        if self.cost.is_flux_limiting:
            reach = self.cost.gamma * self.tau
            lo, hi = max(lo, self.prev[j] - reach), min(hi, self.prev[j] + reach)
        pad = 1e-15 * max(1.0, abs(lo), abs(hi))
        return lo + pad, hi - pad

    def refine(self, start: np.ndarray) -> np.ndarray:
        x = start.copy()
        value = self.objective.value(x)
        for sweep in range(self.max_sweeps):
            before = value
            for j in range(1, x.size - 1):
                lo, hi = self._bounds(x, j)
                trial = x.copy()

                def along(t: float) -> float:
                    trial[j] = t
                    return self.objective.value(trial)

                res = minimize_scalar(along, bounds=(lo, hi), method="bounded", options={"xatol": self.xatol, "maxiter": 500})
                if res.fun <= value:
                    x[j], value = res.x, res.fun
            if before - value < self.sweep_tol:
                logger.debug(f"oracle converged after {sweep + 1} sweeps, phi={value:.17g}")
                break
        return x

    def candidates(self, n_starts: int = 20, seed: int = 0) -> List[np.ndarray]:
        rng = np.random.default_rng(seed)
        return [self.refine(self.random_start(rng)) for _ in range(n_starts)]


def brute_force_candidates(cost: CostModel, energy: EnergyModel, tau: float, x_prev: IdfVector,
                           n_starts: int = 20, seed: int = 0) -> List[IdfVector]:
    oracle = CoordinateOracle(cost, energy, tau, x_prev)
    return [IdfVector(a=x_prev.a, b=x_prev.b, values=v) for v in oracle.candidates(n_starts, seed)]


def brute_force_step(cost: CostModel, energy: EnergyModel, tau: float, x_prev: IdfVector,
                     n_starts: int = 20, seed: Optional[int] = 0) -> IdfVector:
    """Best of the refined random starts."""
    oracle = CoordinateOracle(cost, energy, tau, x_prev)
    results = oracle.candidates(n_starts, seed)
    best = min(results, key=oracle.objective.value)
    return IdfVector(a=x_prev.a, b=x_prev.b, values=best)
