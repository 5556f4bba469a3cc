import asyncio
import logging
from concurrent.futures import ProcessPoolExecutor
from typing import Dict, List, Optional, Sequence
import numpy as np

from src.core.config import settings
from src.core.exceptions import ConvergenceError
from src.models.schema import ConvergenceLevel, ConvergenceResult, IdfVector, RunConfig
from src.solver.grid import idf_function_distance, l1_density_distance, l1_idf_distance
from src.solver.scenario import common_horizon, solve_final_state

logger = logging.getLogger(__name__)

SLOPE_BAND = (0.7, 1.3)


def _is_finer(axis: str, level: float, reference: float) -> bool:
    return level > reference if axis == "grid" else level < reference


def _ordered_levels(axis: str, levels: Sequence[float], reference: float) -> List[float]:
    if axis not in ("grid", "timestep"):
        raise ConvergenceError(f"axis must be 'grid' or 'timestep', got {axis!r}")
    if not levels:
        raise ConvergenceError("at least one level is required")
    if len(set(levels)) != len(levels):
        raise ConvergenceError(f"levels must be distinct, got {list(levels)}")
    finer = [lv for lv in levels if _is_finer(axis, lv, reference)]
    if finer:
        raise ConvergenceError(f"levels {finer} are finer than the reference {reference}")
    if axis == "grid":
        if any(int(lv) != lv or lv < 2 for lv in list(levels) + [reference]):
            raise ConvergenceError("grid levels must be integers k >= 2")
        return sorted(levels)
    if any(lv <= 0 for lv in list(levels) + [reference]):
        raise ConvergenceError("timestep levels must be positive")
    return sorted(levels, reverse=True)


def fit_slope(axis: str, levels: Sequence[float], errors: Sequence[float]) -> float:
    """Least-squares slope of log(error) against log(mesh size): 1/k on the grid axis, tau on the timestep axis."""
    h = np.array([ConvergenceResult.mesh_size(axis, lv) for lv in levels])
    err = np.asarray(errors, dtype=float)
    if h.size < 2:
        raise ConvergenceError("a slope needs at least two levels with nonzero error")
    if np.any(err <= 0):
        raise ConvergenceError("cannot fit a log-log slope through zero errors")
    slope, _ = np.polyfit(np.log(h), np.log(err), 1)
    return float(slope)


def level_config(scenario: RunConfig, axis: str, level: float, horizon: float) -> RunConfig:
    return scenario.with_level(axis, level, t_end=horizon)


def level_errors(axis: str, state: IdfVector, reference: IdfVector):
    if axis == "grid":
        return idf_function_distance(state, reference), l1_density_distance(state, reference)
    return l1_idf_distance(state, reference), l1_density_distance(state, reference)


class ConvergenceStudy:
    """Solves one scenario at every level and at the reference level, then fits log-log slopes."""

    def __init__(self, axis: str, scenario: RunConfig, levels: Sequence[float], reference_level: float,
                 max_workers: Optional[int] = None):
        self.axis = axis
        self.scenario = scenario
        self.reference = float(reference_level)
        self.levels = _ordered_levels(axis, [float(lv) for lv in levels], self.reference)
        self.max_workers = settings.MAX_WORKERS if max_workers is None else max_workers
        if axis == "timestep":
            self.horizon = common_horizon(scenario.t_end, self.levels + [self.reference])
            if self.horizon != scenario.t_end:
                logger.info(f"timestep study horizon moved from T={scenario.t_end} to T={self.horizon} so every tau divides it")
        else:
            self.horizon = scenario.t_end

    async def _solve_all(self) -> Dict[float, IdfVector]:
        loop = asyncio.get_running_loop()
        targets = sorted(set(self.levels + [self.reference]))
        configs = {lv: level_config(self.scenario, self.axis, lv, self.horizon) for lv in targets}
        executor = ProcessPoolExecutor(max_workers=self.max_workers) if self.max_workers > 1 else None
        try:
            futures = [loop.run_in_executor(executor, solve_final_state, configs[lv]) for lv in targets]
            states = await asyncio.gather(*futures)
        finally:
            if executor is not None:
                executor.shutdown()
        return dict(zip(targets, states))

    async def run(self) -> ConvergenceResult:
        logger.info(f"Convergence study ({self.axis}): levels={self.levels}, reference={self.reference}, T={self.horizon}")
        states = await self._solve_all()
        ref_state = states[self.reference]
        rows: List[ConvergenceLevel] = []
        for lv in self.levels:
            if lv == self.reference:
                logger.warning(f"level {lv} equals the reference; error is 0 and the level is excluded from the fit")
                rows.append(ConvergenceLevel(level=lv, err_idf=0.0, err_density=0.0, excluded=True))
                continue
            err_idf, err_density = level_errors(self.axis, states[lv], ref_state)
            logger.info(f"level {lv}: err_idf={err_idf:.6e}, err_density={err_density:.6e}")
            rows.append(ConvergenceLevel(level=lv, err_idf=err_idf, err_density=err_density))

        fitted = [r for r in rows if not r.excluded]
        slope = slope_density = float("nan")
        if len(fitted) >= 2:
            slope = fit_slope(self.axis, [r.level for r in fitted], [r.err_idf for r in fitted])
            slope_density = fit_slope(self.axis, [r.level for r in fitted], [r.err_density for r in fitted])
            logger.info(f"fitted slopes: idf={slope:.4f}, density={slope_density:.4f}")
        else:
            logger.warning("fewer than two usable levels; slopes are undefined")
        return ConvergenceResult(
            axis=self.axis,
            reference=self.reference,
            levels=rows,
            fitted_slope=slope,
            fitted_slope_density=slope_density,
        )


async def convergence_study(axis: str, scenario: RunConfig, levels: Sequence[float], reference_level: float,
                            max_workers: Optional[int] = None) -> ConvergenceResult:
    return await ConvergenceStudy(axis, scenario, levels, reference_level, max_workers).run()


def slope_in_band(slope: float, band=SLOPE_BAND) -> bool:
    return bool(np.isfinite(slope) and band[0] <= slope <= band[1])
