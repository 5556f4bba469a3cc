import math
from typing import Optional, List, Tuple, Literal, Dict, Any
import numpy as np
from scipy.integrate import trapezoid
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.core.exceptions import GridError


def _readonly(values: Any) -> np.ndarray:
    arr = np.array(values, dtype=float, copy=True)
    if arr.ndim != 1:
        raise GridError(f"expected a 1-D array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


class CostModel(BaseModel):
    """Transport cost c. `p` applies to p_power, `gamma` to relativistic."""
    model_config = ConfigDict(frozen=True)

    kind: Literal["p_power", "relativistic"]
    p: Optional[float] = None
    gamma: Optional[float] = None
    # relativistic growth constants are reported on |s| <= envelope_bound * gamma
    envelope_bound: float = Field(default=0.9, gt=0.0, lt=1.0)

    @model_validator(mode="after")
    def _check_parameters(self) -> "CostModel":
        if self.kind == "p_power":
            if self.p is None or not (1.0 < self.p < math.inf):
                raise ValueError(f"p_power cost needs p in (1, inf), got p={self.p}")
        else:
            if self.gamma is None or not (0.0 < self.gamma < math.inf):
                raise ValueError(f"relativistic cost needs gamma > 0, got gamma={self.gamma}")
        return self

    @classmethod
    def p_power(cls, p: float) -> "CostModel":
        return cls(kind="p_power", p=p)

    @classmethod
    def relativistic(cls, gamma: float = 1.0, envelope_bound: float = 0.9) -> "CostModel":
        return cls(kind="relativistic", gamma=gamma, envelope_bound=envelope_bound)

    @property
    def is_flux_limiting(self) -> bool:
        return self.kind == "relativistic"


class Potential(BaseModel):
    """
    Convex external potential v on `domain`.
    coefficients: constant -> (value,), quadratic -> (weight,) for weight/2*(x-center)^2,
    polynomial -> ascending power coefficients.
    """
    model_config = ConfigDict(frozen=True)

    kind: Literal["constant", "quadratic", "polynomial"] = "constant"
    coefficients: Tuple[float, ...] = (0.0,)
    center: float = 0.0
    domain: Tuple[float, float]

    @model_validator(mode="after")
    def _check_convexity(self) -> "Potential":
        lo, hi = self.domain
        if not lo < hi:
            raise ValueError(f"potential domain must satisfy a < b, got {self.domain}")
        if self.kind in ("constant", "quadratic") and len(self.coefficients) != 1:
            raise ValueError(f"{self.kind} potential takes exactly one coefficient")
        if not self.coefficients:
            raise ValueError("polynomial potential needs at least one coefficient")
        from src.solver.energy import potential_eval
        grid = np.linspace(lo, hi, 1024)
        _, _, v2 = potential_eval(self, grid)
        scale = max(1.0, float(np.max(np.abs(v2))))
        if np.min(v2) < -1e-12 * scale:
            raise ValueError(f"potential is not convex on [{lo}, {hi}]: min v'' = {np.min(v2):.3e}")
        return self

    @classmethod
    def constant(cls, value: float = 0.0, domain: Tuple[float, float] = (0.0, 1.0)) -> "Potential":
        return cls(kind="constant", coefficients=(value,), domain=domain)

    @classmethod
    def quadratic(cls, weight: float, center: float = 0.0, domain: Tuple[float, float] = (0.0, 1.0)) -> "Potential":
        return cls(kind="quadratic", coefficients=(weight,), center=center, domain=domain)

    @classmethod
    def polynomial(cls, coefficients: List[float], domain: Tuple[float, float] = (0.0, 1.0)) -> "Potential":
        return cls(kind="polynomial", coefficients=tuple(coefficients), domain=domain)

    @property
    def is_constant(self) -> bool:
        if self.kind == "constant":
            return True
        if self.kind == "quadratic":
            return self.coefficients[0] == 0.0
        return all(c == 0.0 for c in self.coefficients[1:])


class EnergyModel(BaseModel):
    model_config = ConfigDict(frozen=True)

    m: float = Field(default=1.0, ge=1.0)
    potential: Potential

    @classmethod
    def boltzmann(cls, potential: Optional[Potential] = None) -> "EnergyModel":
        return cls(m=1.0, potential=potential or Potential.constant())

    @classmethod
    def renyi(cls, m: float, potential: Optional[Potential] = None) -> "EnergyModel":
        return cls(m=m, potential=potential or Potential.constant())


class IdfVector(BaseModel):
    """Grid values a = x_0 < x_1 < ... < x_k = b of a piecewise-constant inverse distribution function."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    a: float
    b: float
    values: np.ndarray

    @field_validator("values", mode="before")
    @classmethod
    def _as_array(cls, v: Any) -> np.ndarray:
        return _readonly(v)

    @model_validator(mode="after")
    def _check_invariants(self) -> "IdfVector":
        x = self.values
        if x.size < 3:
            raise GridError(f"an IdfVector needs k >= 2 (got {x.size} values)")
        if x[0] != self.a or x[-1] != self.b:
            raise GridError(f"endpoints must be exactly ({self.a}, {self.b}), got ({x[0]}, {x[-1]})")
        gaps = np.diff(x)
        if not np.all(gaps > 0):
            first = int(np.argmax(~(gaps > 0)))
            raise GridError(f"values must be strictly increasing; violated between index {first} and {first + 1}")
        return self

    @classmethod
    def from_interior(cls, a: float, b: float, interior: np.ndarray) -> "IdfVector":
        return cls(a=a, b=b, values=np.concatenate(([a], np.asarray(interior, dtype=float), [b])))

    @classmethod
    def equispaced(cls, a: float, b: float, k: int) -> "IdfVector":
        values = np.linspace(a, b, k + 1)
        values[0], values[-1] = a, b
        return cls(a=a, b=b, values=values)

    @property
    def k(self) -> int:
        return self.values.size - 1

    @property
    def interior(self) -> np.ndarray:
        return self.values[1:-1]


class PiecewiseDensity(BaseModel):
    """Density with value cell_values[i] on (breakpoints[i], breakpoints[i+1])."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    breakpoints: np.ndarray
    cell_values: np.ndarray

    @field_validator("breakpoints", "cell_values", mode="before")
    @classmethod
    def _as_array(cls, v: Any) -> np.ndarray:
        return _readonly(v)

    @model_validator(mode="after")
    def _check_shapes(self) -> "PiecewiseDensity":
        if self.breakpoints.size != self.cell_values.size + 1:
            raise GridError("breakpoints must have exactly one more entry than cell_values")
        if np.any(np.diff(self.breakpoints) < 0):
            raise GridError("breakpoints must be nondecreasing")
        if np.any(self.cell_values < 0):
            raise GridError("densities must be nonnegative")
        return self

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.breakpoints)

    def mass(self) -> float:
        return float(np.sum(self.cell_values * self.widths))

    @property
    def support(self) -> Tuple[float, float]:
        return float(self.breakpoints[0]), float(self.breakpoints[-1])

    def nodes(self) -> Tuple[np.ndarray, np.ndarray]:
        """Piecewise-linear node representation; jumps become repeated abscissae."""
        x = np.repeat(self.breakpoints, 2)[1:-1]
        u = np.repeat(self.cell_values, 2)
        return x, u


class UniformDensity(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["uniform"] = "uniform"
    support: Tuple[float, float]

    @model_validator(mode="after")
    def _check_support(self) -> "UniformDensity":
        r, s = self.support
        if not r < s:
            raise ValueError(f"uniform support must satisfy r < s, got {self.support}")
        return self

    def nodes(self) -> Tuple[np.ndarray, np.ndarray]:
        r, s = self.support
        height = 1.0 / (s - r)
        return np.array([r, s]), np.array([height, height])


class TabulatedDensity(BaseModel):
    """Piecewise-linear density through (x, u), zero outside [x[0], x[-1]]."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    kind: Literal["tabulated"] = "tabulated"
    x: np.ndarray
    u: np.ndarray

    @field_validator("x", "u", mode="before")
    @classmethod
    def _as_array(cls, v: Any) -> np.ndarray:
        return _readonly(v)

    @model_validator(mode="after")
    def _check_table(self) -> "TabulatedDensity":
        if self.x.size != self.u.size or self.x.size < 2:
            raise GridError("tabulated density needs matching x/u columns with at least two rows")
        if np.any(np.diff(self.x) < 0):
            raise GridError("tabulated abscissae must be nondecreasing")
        if np.any(self.u < 0):
            raise GridError("tabulated density must be nonnegative")
        if trapezoid(self.u, self.x) <= 0:
            raise GridError("tabulated density has zero mass")
        return self

    @property
    def support(self) -> Tuple[float, float]:
        return float(self.x[0]), float(self.x[-1])

    def nodes(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.x, self.u


class JkoConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    tau: float = Field(gt=0.0)
    t_end: float = Field(gt=0.0)
    newton_tol: Optional[float] = Field(default=None, gt=0.0)
    newton_rtol: float = Field(default=1e-14, gt=0.0)
    stall_rtol: float = Field(default=1e-8, gt=0.0)
    newton_max_iter: int = Field(default=200, ge=1)
    armijo_shrink: float = Field(default=0.5, gt=0.0, lt=1.0)
    max_backtracks: int = Field(default=80, ge=1)
    min_gap: float = Field(default=0.0, ge=0.0)

    @model_validator(mode="after")
    def _check_horizon(self) -> "JkoConfig":
        ratio = self.t_end / self.tau
        if round(ratio) < 1 or abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
            raise ValueError(f"t_end/tau must be a positive integer, got {ratio!r}")
        return self

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.tau))

    def tolerance(self, k: int, energy: float) -> float:
        if self.newton_tol is not None:
            return self.newton_tol
        return self.newton_rtol * k * max(1.0, abs(energy))

    def stall_tolerance(self, k: int, energy: float) -> float:
        return max(self.stall_rtol * k * max(1.0, abs(energy)), self.tolerance(k, energy))


class StepReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    n: int
    t: float
    energy: float
    transport: float
    min_dx: float
    max_dx: float
    min_d2x: float
    max_d2x: float
    max_speed: float
    newton_iters: int
    grad_norm: float = 0.0

    @model_validator(mode="after")
    def _check_finite(self) -> "StepReport":
        fields = (self.energy, self.transport, self.min_dx, self.max_dx, self.min_d2x, self.max_d2x, self.max_speed, self.grad_norm)
        if not all(math.isfinite(v) for v in fields):
            raise ValueError(f"step {self.n} produced non-finite diagnostics")
        return self


DIAGNOSTIC_COLUMNS = ["n", "t", "energy", "transport", "min_dx", "max_dx", "min_d2x", "max_d2x", "max_speed", "newton_iters"]


class Trajectory(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    tau: float
    states: List[IdfVector]
    reports: List[StepReport] = []

    @model_validator(mode="after")
    def _check_lengths(self) -> "Trajectory":
        if not self.states:
            raise ValueError("a trajectory needs at least the initial state")
        if len(self.reports) != len(self.states) - 1:
            raise ValueError(f"expected {len(self.states) - 1} step reports, got {len(self.reports)}")
        return self

    @property
    def n_steps(self) -> int:
        return len(self.states) - 1

    @property
    def times(self) -> np.ndarray:
        return self.tau * np.arange(len(self.states))

    def matrix(self) -> np.ndarray:
        """States stacked as an (N+1, k+1) array."""
        return np.vstack([s.values for s in self.states])


class InvariantCheck(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    worst: float
    step: int
    passed: bool
    tolerance: float = 0.0
    applicable: bool = True


class AuditReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    items: List[InvariantCheck]

    @property
    def passed(self) -> bool:
        return all(item.passed for item in self.items)

    def item(self, name: str) -> InvariantCheck:
        for it in self.items:
            if it.name == name:
                return it
        raise KeyError(name)

    def to_lines(self) -> List[str]:
        lines = ["name,worst,step,pass"]
        for it in self.items:
            lines.append(f"{it.name},{it.worst:.17g},{it.step},{str(it.passed).lower()}")
        return lines


class ConvergenceLevel(BaseModel):
    model_config = ConfigDict(frozen=True)

    level: float
    err_idf: float
    err_density: float
    excluded: bool = False


class ConvergenceResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    axis: Literal["grid", "timestep"]
    reference: float
    levels: List[ConvergenceLevel]
    fitted_slope: float
    fitted_slope_density: float

    @model_validator(mode="after")
    def _check_order(self) -> "ConvergenceResult":
        values = [lv.level for lv in self.levels]
        increasing = all(b > a for a, b in zip(values, values[1:]))
        decreasing = all(b < a for a, b in zip(values, values[1:]))
        if not (increasing or decreasing):
            raise ValueError("levels must be strictly ordered")
        for lv in self.levels:
            if not lv.excluded and not (lv.err_idf > 0 and lv.err_density >= 0):
                raise ValueError(f"level {lv.level} has a non-positive error but was not excluded")
        return self

    @staticmethod
    def mesh_size(axis: str, level: float) -> float:
        """Refinement parameter of the log-log fit: 1/k on the grid axis, tau on the timestep axis."""
        return 1.0 / level if axis == "grid" else level


class InitSpec(BaseModel):
    """Initial density as configured: uniform on `support`, or a two-column CSV at `file`."""
    model_config = ConfigDict(frozen=True)

    kind: Literal["uniform", "csv"] = "uniform"
    support: Optional[Tuple[float, float]] = None
    file: Optional[str] = None

    @model_validator(mode="after")
    def _check_source(self) -> "InitSpec":
        if self.kind == "uniform" and self.support is None:
            raise ValueError("missing key 'init_support' required by init = uniform")
        if self.kind == "csv" and not self.file:
            raise ValueError("missing key 'init_file' required by init = csv")
        return self


def default_snapshot_ladder(tau: float, t_end: float, base: float = 0.01, exponent_step: float = 0.12) -> List[float]:
    """t = base * 10^(exponent_step*j) up to t_end, rounded to whole steps."""
    steps: List[int] = []
    j = 0
    while True:
        t = base * 10.0 ** (exponent_step * j)
        if t > t_end * (1 + 1e-12):
            break
        n = max(1, int(round(t / tau)))
        if not steps or n != steps[-1]:
            steps.append(n)
        j += 1
    return [n * tau for n in steps]


class RunConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    a: float
    b: float
    k: int
    tau: float = Field(gt=0.0)
    t_end: float = Field(gt=0.0)
    cost: CostModel
    m: float = Field(default=1.0, ge=1.0)
    potential: Potential
    init: InitSpec
    floor: float = Field(default=1e-3, ge=0.0, le=1e-3)
    output_dir: str = "output"
    snapshot_times: List[float] = []
    newton_tol: Optional[float] = Field(default=None, gt=0.0)
    newton_max_iter: int = Field(default=200, ge=1)
    armijo_shrink: float = Field(default=0.5, gt=0.0, lt=1.0)
    min_gap: float = Field(default=0.0, ge=0.0)

    @field_validator("k")
    @classmethod
    def _check_k(cls, k: int) -> int:
        if k < 2:
            raise ValueError("k must be ≥ 2")
        return k

    @model_validator(mode="before")
    @classmethod
    def _default_ladder(cls, data: Any) -> Any:
        if isinstance(data, dict) and not data.get("snapshot_times"):
            tau, t_end = data.get("tau"), data.get("t_end")
            if isinstance(tau, (int, float)) and isinstance(t_end, (int, float)) and 0 < tau <= t_end:
                data = {**data, "snapshot_times": default_snapshot_ladder(float(tau), float(t_end))}
        return data

    @model_validator(mode="after")
    def _check_run(self) -> "RunConfig":
        if not self.a < self.b:
            raise ValueError(f"domain must satisfy a < b, got a={self.a}, b={self.b}")
        if tuple(self.potential.domain) != (self.a, self.b):
            raise ValueError("potential domain must equal the run domain [a, b]")
        if self.init.kind == "uniform":
            r, s = self.init.support
            if r < self.a or s > self.b:
                raise ValueError(f"init_support {self.init.support} is not inside [{self.a}, {self.b}]")
        ratio = self.t_end / self.tau
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio) or round(ratio) < 1:
            raise ValueError(f"t_end/tau must be a positive integer, got {ratio!r}")
        for t in self.snapshot_times:
            q = t / self.tau
            if abs(q - round(q)) > 1e-9 * max(1.0, q) or t < 0 or t > self.t_end * (1 + 1e-12):
                raise ValueError(f"snapshot time {t} is not a multiple of tau within [0, t_end]")
        return self

    @property
    def energy(self) -> EnergyModel:
        return EnergyModel(m=self.m, potential=self.potential)

    @property
    def jko(self) -> JkoConfig:
        return JkoConfig(
            tau=self.tau,
            t_end=self.t_end,
            newton_tol=self.newton_tol,
            newton_max_iter=self.newton_max_iter,
            armijo_shrink=self.armijo_shrink,
            min_gap=self.min_gap,
        )

    @property
    def snapshot_steps(self) -> List[int]:
        return sorted({int(round(t / self.tau)) for t in self.snapshot_times})

    def with_level(self, axis: str, level: float, t_end: Optional[float] = None) -> "RunConfig":
        """Validated copy with k (grid axis) or tau (timestep axis) replaced; only the final time is snapshotted."""
        horizon = self.t_end if t_end is None else t_end
        update: Dict[str, Any] = {"t_end": horizon, "snapshot_times": [horizon]}
        if axis == "grid":
            update["k"] = int(level)
        else:
            update["tau"] = float(level)
        return RunConfig.model_validate({**self.model_dump(), **update})
