import logging
from typing import Callable, Optional, Tuple, Union, List
import numpy as np

from src.core.exceptions import (
    GridError,
    InfeasibleIterateError,
    LagFlowError,
    NewtonConvergenceError,
    StepFailedError,
)
from src.models.schema import CostModel, EnergyModel, IdfVector, JkoConfig, StepReport, Trajectory
from src.solver.cost import (
    cost_value,
    cost_prime,
    cost_second,
    dual_prime,
    curvature_floor,
    hessian_speed_floor,
    satisfies_curvature_floor,
)
from src.solver.energy import dh_x, ddh_x, potential_eval, total_energy, kappa_bar
from src.solver.grid import delta, delta2
from src.solver.tridiagonal import SymmetricTridiagonal, solve_tridiagonal

logger = logging.getLogger(__name__)

EPS = np.finfo(float).eps

Observer = Callable[[StepReport], None]
Vector = Union[IdfVector, np.ndarray]


def _values(x: Vector) -> np.ndarray:
    return x.values if isinstance(x, IdfVector) else np.asarray(x, dtype=float)


class JkoObjective:
    """
    Phi(x) = tau (1/k) sum_i c((x_i - x_i^prev)/tau) + H_m(x) for one time step,
    with derivatives taken in the k-1 interior coordinates.
    """

    def __init__(self, cost: CostModel, energy: EnergyModel, tau: float, x_prev: IdfVector):
        self.cost = cost
        self.energy = energy
        self.tau = tau
        self.prev = x_prev.values
        self.k = x_prev.k
        self.a, self.b = x_prev.a, x_prev.b

    def _check_shape(self, values: np.ndarray):
        if values.shape != self.prev.shape:
            raise GridError(f"dimension mismatch: {values.size - 1} vs k={self.k}")

    def speeds(self, values: np.ndarray) -> np.ndarray:
        return (values - self.prev) / self.tau

    def within_flux_limit(self, values: np.ndarray) -> bool:
        if not self.cost.is_flux_limiting:
            return True
        return bool(np.all(np.abs(self.speeds(values)) < self.cost.gamma))

    def transport(self, values: np.ndarray) -> float:
        """tau * W_{c,tau}(x, x_prev)."""
        return self.tau * float(np.sum(cost_value(self.cost, self.speeds(values)))) / self.k

    def value(self, values: np.ndarray) -> float:
        self._check_shape(values)
        if not self.within_flux_limit(values):
            return float("inf")
        energy = total_energy(self.energy, values)
        if not np.isfinite(energy):
            return float("inf")
        return self.transport(values) + energy

    def _require_feasible(self, values: np.ndarray):
        self._check_shape(values)
        gaps = np.diff(values)
        if not np.all(gaps > 0.0):
            raise InfeasibleIterateError("non-positive gap x_{i+1} - x_i", int(np.argmax(~(gaps > 0.0))))
        if self.cost.is_flux_limiting:
            over = np.abs(self.speeds(values)) >= self.cost.gamma
            if np.any(over):
                raise InfeasibleIterateError(f"displacement reaches gamma*tau={self.cost.gamma * self.tau}", int(np.argmax(over)))

    def gradient(self, values: np.ndarray) -> np.ndarray:
        self._require_feasible(values)
        k = self.k
        hp = dh_x(self.energy, k * np.diff(values))
        _, v1, _ = potential_eval(self.energy.potential, values[1:-1])
        transport = cost_prime(self.cost, self.speeds(values)[1:-1]) / k
        return transport + hp[:-1] - hp[1:] + v1 / k

    def hessian(self, values: np.ndarray) -> SymmetricTridiagonal:
        self._require_feasible(values)
        k = self.k
        s = np.abs(self.speeds(values)[1:-1])
        s = np.maximum(s, hessian_speed_floor(self.cost, self.tau))
        hpp = ddh_x(self.energy, k * np.diff(values))
        _, _, v2 = potential_eval(self.energy.potential, values[1:-1])
        diag = cost_second(self.cost, s) / (k * self.tau) + k * hpp[:-1] + k * hpp[1:] + v2 / k
        off = -k * hpp[1:-1]
        return SymmetricTridiagonal(np.asarray(diag, dtype=float), np.asarray(off, dtype=float))

    def newton_matrix(self, values: np.ndarray) -> SymmetricTridiagonal:
        """
        Matrix of the Newton system. For p < 2, where c'' blows up at rest, the transport
        curvature is the secant of c' between the current speed and the speed (c*)'(a_i)
        the Euler-Lagrange equation predicts; it tends to c'' at the minimizer.
        """
        if not (self.cost.kind == "p_power" and self.cost.p < 2.0):
            return self.hessian(values)
        self._require_feasible(values)
        k = self.k
        s = self.speeds(values)[1:-1]
        a = el_argument(self.energy, values)
        target = np.asarray(dual_prime(self.cost, a), dtype=float)
        gap = s - target
        reach = np.maximum(np.abs(s), np.abs(target))
        near = np.abs(gap) <= 1e-6 * reach
        with np.errstate(divide="ignore", invalid="ignore"):
            secant = (np.asarray(cost_prime(self.cost, s), dtype=float) - a) / np.where(near, 1.0, gap)
        tangent = np.asarray(cost_second(self.cost, np.where(reach > 0.0, reach, hessian_speed_floor(self.cost, self.tau))), dtype=float)
        curvature = np.where(near | ~np.isfinite(secant) | (secant <= 0.0), tangent, secant)

        hpp = ddh_x(self.energy, k * np.diff(values))
        _, _, v2 = potential_eval(self.energy.potential, values[1:-1])
        diag = curvature / (k * self.tau) + k * hpp[:-1] + k * hpp[1:] + v2 / k
        off = -k * hpp[1:-1]
        return SymmetricTridiagonal(np.asarray(diag, dtype=float), np.asarray(off, dtype=float))


def phi(cost: CostModel, energy: EnergyModel, tau: float, x_prev: IdfVector, x: Vector) -> float:
    """Per-step objective; +inf when x is not strictly monotone or exceeds the flux limit."""
    return JkoObjective(cost, energy, tau, x_prev).value(_values(x))


def grad_phi(cost: CostModel, energy: EnergyModel, tau: float, x_prev: IdfVector, x: Vector) -> np.ndarray:
    return JkoObjective(cost, energy, tau, x_prev).gradient(_values(x))


def hess_phi(cost: CostModel, energy: EnergyModel, tau: float, x_prev: IdfVector, x: Vector) -> SymmetricTridiagonal:
    return JkoObjective(cost, energy, tau, x_prev).hessian(_values(x))


def el_argument(energy: EnergyModel, x: Vector) -> np.ndarray:
    """a_i = k (h_X'(dx_i) - h_X'(dx_{i-1})) - v'(x_i), i = 1..k-1."""
    values = _values(x)
    k = values.size - 1
    hp = dh_x(energy, k * np.diff(values))
    _, v1, _ = potential_eval(energy.potential, values[1:-1])
    return k * (hp[1:] - hp[:-1]) - v1


def discrete_velocity(cost: CostModel, energy: EnergyModel, x: Vector) -> np.ndarray:
    """(c*)'(a_i): the velocity the Euler-Lagrange equation assigns to each interior point."""
    return np.asarray(dual_prime(cost, el_argument(energy, x)), dtype=float)


def _trial_ok(obj: JkoObjective, trial: np.ndarray, min_gap: float) -> bool:
    if not np.all(np.diff(trial) > min_gap):
        return False
    return obj.within_flux_limit(trial)


def step_report(cost: CostModel, energy: EnergyModel, tau: float, n: int, x_prev: IdfVector, x: IdfVector,
                newton_iters: int, grad_norm: float) -> StepReport:
    obj = JkoObjective(cost, energy, tau, x_prev)
    dx, d2x = delta(x), delta2(x)
    return StepReport(
        n=n,
        t=n * tau,
        energy=total_energy(energy, x),
        transport=obj.transport(x.values),
        min_dx=float(dx.min()),
        max_dx=float(dx.max()),
        min_d2x=float(d2x.min()),
        max_d2x=float(d2x.max()),
        max_speed=float(np.max(np.abs(obj.speeds(x.values)))),
        newton_iters=newton_iters,
        grad_norm=grad_norm,
    )


def jko_step(cost: CostModel, energy: EnergyModel, cfg: JkoConfig, x_prev: IdfVector, n: int = 1) -> Tuple[IdfVector, StepReport]:
    """
    Minimize Phi by damped Newton started at x_prev.
    Steps are halved until every gap exceeds min_gap, the flux limit holds,
    and Phi does not increase beyond rounding.
    """
    obj = JkoObjective(cost, energy, cfg.tau, x_prev)
    x = x_prev.values.copy()
    if not np.all(np.diff(x) > cfg.min_gap):
        raise InfeasibleIterateError(f"start has a gap <= min_gap={cfg.min_gap}", int(np.argmax(~(np.diff(x) > cfg.min_gap))))
    phi_x = obj.value(x)
    if not np.isfinite(phi_x):
        raise InfeasibleIterateError("objective is infinite at the start iterate", 0)

    start_energy = total_energy(energy, x_prev)
    tol = cfg.tolerance(obj.k, start_energy)
    loose = cfg.stall_tolerance(obj.k, start_energy)
    step_floor = 8.0 * EPS * (obj.b - obj.a)

    iters = 0
    grad = obj.gradient(x)
    grad_norm = float(np.max(np.abs(grad), initial=0.0))
    while grad_norm > tol:
        if iters >= cfg.newton_max_iter:
            if grad_norm <= loose:
                logger.warning(f"step {n}: iteration cap reached at |grad|={grad_norm:.3e}; within the stall tolerance")
                break
            raise NewtonConvergenceError(iters, grad_norm)
        hess = obj.newton_matrix(x)
        direction = -solve_tridiagonal(hess.diag, hess.off, grad)

        h = 1.0
        trial = x.copy()
        phi_trial = float("inf")
        accepted = False
        for backtrack in range(cfg.max_backtracks):
            trial[1:-1] = x[1:-1] + h * direction
            if _trial_ok(obj, trial, cfg.min_gap):
                phi_trial = obj.value(trial)
                if phi_trial <= phi_x + 4.0 * EPS * max(1.0, abs(phi_x)):
                    accepted = True
                    break
            logger.debug(f"step {n}, newton {iters}: backtrack {backtrack}, h={h:.3e}")
            h *= cfg.armijo_shrink
        if not accepted:
            if grad_norm <= loose:
                logger.warning(f"step {n}: line search exhausted at |grad|={grad_norm:.3e}; accepting at the rounding floor")
                break
            raise NewtonConvergenceError(iters, grad_norm, reason="line search exhausted")

        iters += 1
        moved = h * float(np.max(np.abs(direction), initial=0.0))
        x, phi_x = trial, phi_trial
        grad = obj.gradient(x)
        grad_norm = float(np.max(np.abs(grad), initial=0.0))
        logger.debug(f"step {n}, newton {iters}: h={h:.3e}, |dx|={moved:.3e}, |grad|={grad_norm:.3e}, phi={phi_x:.17g}")
        if moved <= step_floor and tol < grad_norm <= loose:
            logger.warning(f"step {n}: Newton stalled at |grad|={grad_norm:.3e} (tol {tol:.3e})")
            break

    x_new = IdfVector(a=x_prev.a, b=x_prev.b, values=x)
    return x_new, step_report(cost, energy, cfg.tau, n, x_prev, x_new, iters, grad_norm)


def evolve(cost: CostModel, energy: EnergyModel, cfg: JkoConfig, x0: IdfVector,
           observer: Optional[Observer] = None) -> Trajectory:
    """Run T/tau JKO steps from x0; the observer sees each StepReport as it is produced."""
    if satisfies_curvature_floor(cost) and not energy.potential.is_constant:
        kappa = kappa_bar(energy.potential) / curvature_floor(cost)
        logger.info(f"curvature ratio kappa={kappa:.6g}; lower dx rate exp(-tau*kappa)={np.exp(-cfg.tau * kappa):.6g} (not enforced)")

    states: List[IdfVector] = [x0]
    reports: List[StepReport] = []
    total = cfg.n_steps
    logger.info(f"Evolving k={x0.k}, tau={cfg.tau}, N={total} ({cost.kind}, m={energy.m}, {energy.potential.kind} potential)")
    for n in range(1, total + 1):
        try:
            x_next, report = jko_step(cost, energy, cfg, states[-1], n=n)
        except LagFlowError as exc:
            raise StepFailedError(n, exc) from exc
        states.append(x_next)
        reports.append(report)
        logger.info(f"Step {n}/{total}: H={report.energy:.12g}, max_speed={report.max_speed:.6g}, newton_iters={report.newton_iters}")
        if observer is not None:
            observer(report)
    return Trajectory(tau=cfg.tau, states=states, reports=reports)
