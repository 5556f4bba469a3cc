import logging
from typing import Optional
import numpy as np
import pandas as pd

from src.core.exceptions import ConfigError
from src.models.schema import RunConfig, InitSpec, IdfVector, UniformDensity, TabulatedDensity, Trajectory
from src.solver.grid import from_density, DensitySpec
from src.solver.jko import evolve, Observer

logger = logging.getLogger(__name__)


def read_density_table(path: str) -> TabulatedDensity:
    """Two-column CSV (x, u); a header row is optional."""
    try:
        frame = pd.read_csv(path, header=None, comment="#")
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise ConfigError(f"cannot read init_file {path}: {exc}")
    if frame.shape[1] != 2:
        raise ConfigError(f"init_file {path} must have exactly two columns (x, u), found {frame.shape[1]}")
    numeric = frame.apply(pd.to_numeric, errors="coerce")
    if numeric.iloc[0].isna().any():
        numeric = numeric.iloc[1:]
    if numeric.isna().any().any():
        raise ConfigError(f"init_file {path} contains non-numeric rows")
    return TabulatedDensity(x=numeric.iloc[:, 0].to_numpy(float), u=numeric.iloc[:, 1].to_numpy(float))


def initial_density(init: InitSpec) -> DensitySpec:
    if init.kind == "uniform":
        return UniformDensity(support=init.support)
    return read_density_table(init.file)


def initial_state(cfg: RunConfig) -> IdfVector:
    return from_density(initial_density(cfg.init), cfg.k, cfg.a, cfg.b, cfg.floor)


def solve(cfg: RunConfig, observer: Optional[Observer] = None) -> Trajectory:
    return evolve(cfg.cost, cfg.energy, cfg.jko, initial_state(cfg), observer)


def solve_final_state(cfg: RunConfig) -> IdfVector:
    """Final state only; module-level so it can be shipped to a worker process."""
    return solve(cfg).states[-1]


def common_horizon(t_end: float, taus) -> float:
    """Smallest multiple of the coarsest tau, at least t_end, that every tau divides."""
    coarsest = max(taus)
    m = int(np.ceil(t_end / coarsest - 1e-9))
    while True:
        horizon = m * coarsest
        if all(abs(horizon / tau - round(horizon / tau)) <= 1e-9 * max(1.0, horizon / tau) for tau in taus):
            return float(round(horizon, 12))
        m += 1
