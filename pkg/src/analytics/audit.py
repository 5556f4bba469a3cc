import logging
from typing import List
import numpy as np

from src.core.exceptions import AuditError
from src.models.schema import AuditReport, CostModel, EnergyModel, InvariantCheck, JkoConfig, Trajectory
from src.solver.cost import cost_tilde, dual_prime, growth_envelope, satisfies_curvature_floor
from src.solver.energy import energy_lower_bound, total_energy
from src.solver.grid import delta2
from src.solver.jko import el_argument

logger = logging.getLogger(__name__)

DISSIPATION_RTOL = 1e-10
DX_SLACK = 1e-9
D2X_RTOL = 1e-7
BOUND_RTOL = 1e-8
HOLDER_MAX_SAMPLES = 200


def _check(name: str, violations: np.ndarray, tolerance: float, steps: np.ndarray = None, applicable: bool = True) -> InvariantCheck:
    """worst = max violation, step = where it occurs (-1 when nothing is violated)."""
    if not applicable or violations.size == 0:
        return InvariantCheck(name=name, worst=0.0, step=-1, passed=True, tolerance=tolerance, applicable=applicable)
    idx = int(np.argmax(violations))
    worst = float(violations[idx])
    step = -1 if worst == 0.0 else int(steps[idx] if steps is not None else idx + 1)
    return InvariantCheck(name=name, worst=worst, step=step, passed=worst == 0.0, tolerance=tolerance, applicable=True)


def _not_applicable(name: str) -> InvariantCheck:
    return _check(name, np.zeros(0), 0.0, applicable=False)


def _aggregate(name: str, per_step: np.ndarray, bound: float, tolerance: float) -> InvariantCheck:
    """Cumulative sum against a single bound; step is the first n where the running sum crosses it."""
    running = np.cumsum(per_step)
    excess = running - bound - tolerance
    worst = max(0.0, float(excess[-1])) if excess.size else 0.0
    step = int(np.argmax(excess > 0)) + 1 if worst > 0 else -1
    return InvariantCheck(name=name, worst=worst, step=step, passed=worst == 0.0, tolerance=tolerance)


class TrajectoryAuditor:
    """
    Checks a trajectory against the discrete invariants of the scheme.
    Energies are recomputed from the states; only grad_norm is taken from the step reports.
    """

    def __init__(self, trajectory: Trajectory, cost: CostModel, energy: EnergyModel, cfg: JkoConfig):
        self.trajectory = trajectory
        self.cost = cost
        self.energy = energy
        self.cfg = cfg
        self._validate()
        self.states = trajectory.matrix()
        first = trajectory.states[0]
        self.a, self.b, self.k = first.a, first.b, first.k
        self.tau = trajectory.tau
        self.n_steps = trajectory.n_steps
        self.energies = np.array([total_energy(energy, s) for s in trajectory.states])
        self.grad_norms = np.array([r.grad_norm for r in trajectory.reports])
        self.displacements = np.diff(self.states, axis=0)
        self.lower_bound = energy_lower_bound(energy, self.a, self.b, self.k)
        self.budget = max(0.0, float(self.energies[0] - self.lower_bound))

    def _validate(self):
        traj = self.trajectory
        first = traj.states[0]
        for n, s in enumerate(traj.states):
            if s.k != first.k or s.a != first.a or s.b != first.b:
                raise AuditError(f"state {n} has (k, a, b)=({s.k}, {s.a}, {s.b}), expected ({first.k}, {first.a}, {first.b})")
        if abs(traj.tau - self.cfg.tau) > 1e-12 * self.cfg.tau:
            raise AuditError(f"trajectory tau={traj.tau} does not match config tau={self.cfg.tau}")
        if traj.n_steps != self.cfg.n_steps:
            raise AuditError(f"trajectory has {traj.n_steps} steps, config implies {self.cfg.n_steps}")
        lo, hi = self.energy.potential.domain
        if (lo, hi) != (first.a, first.b):
            raise AuditError(f"potential domain {(lo, hi)} does not match the trajectory domain {(first.a, first.b)}")

    def energy_dissipation(self) -> InvariantCheck:
        prev, curr = self.energies[:-1], self.energies[1:]
        tol = DISSIPATION_RTOL * (1.0 + np.abs(prev))
        return _check("energy_dissipation", np.maximum(0.0, curr - prev - tol), float(tol.max(initial=0.0)))

    def energy_inequality(self) -> InvariantCheck:
        speeds = self.displacements / self.tau
        dissipated = self.tau * np.array([np.sum(cost_tilde(self.cost, s)) for s in speeds]) / self.k
        prev, curr = self.energies[:-1], self.energies[1:]
        tol = self.grad_norms * np.sum(np.abs(self.displacements), axis=1) + DISSIPATION_RTOL * (1.0 + np.abs(prev))
        return _check("energy_inequality", np.maximum(0.0, dissipated - (prev - curr) - tol), float(tol.max(initial=0.0)))

    def dx_principles(self) -> List[InvariantCheck]:
        dx = self.k * np.diff(self.states, axis=1)
        lows, highs = dx.min(axis=1), dx.max(axis=1)
        constant = self.energy.potential.is_constant
        rising_max = np.maximum(0.0, highs[1:] - highs[:-1] - DX_SLACK)
        items = [
            _check("dx_min_principle", np.maximum(0.0, lows[:-1] - lows[1:] - DX_SLACK), DX_SLACK, applicable=constant),
            _check("dx_max_principle", rising_max, DX_SLACK, applicable=constant),
        ]
        upper = not constant and satisfies_curvature_floor(self.cost)
        items.append(_check("dx_upper_bound", rising_max, DX_SLACK, applicable=upper))
        return items

    def d2x_principle(self) -> InvariantCheck:
        name = "d2x_principle"
        if not (self.cost.is_flux_limiting and self.energy.potential.is_constant):
            return _not_applicable(name)
        d2x = np.array([delta2(s) for s in self.trajectory.states])
        lo = min(float(d2x[0].min()), 0.0)
        hi = max(float(d2x[0].max()), 0.0)
        tol = D2X_RTOL * self.k ** 2
        below = np.maximum(0.0, lo - d2x[1:].min(axis=1) - tol)
        above = np.maximum(0.0, d2x[1:].max(axis=1) - hi - tol)
        return _check(name, np.maximum(below, above), tol)

    def flux_limit(self) -> InvariantCheck:
        name = "flux_limit"
        if not self.cost.is_flux_limiting:
            return _not_applicable(name)
        speeds = np.abs(self.displacements).max(axis=1) / self.tau
        # strict: a speed equal to gamma already counts as a violation
        return _check(name, np.maximum(0.0, np.nextafter(speeds, np.inf) - self.cost.gamma), 0.0)

    def _holder_samples(self) -> np.ndarray:
        stride = max(1, int(np.ceil((self.n_steps + 1) / HOLDER_MAX_SAMPLES)))
        return np.unique(np.append(np.arange(0, self.n_steps + 1, stride), self.n_steps))

    def holder_bound(self) -> InvariantCheck:
        name = "holder_bound"
        if not self.energy.potential.is_constant or self.n_steps == 0:
            return _not_applicable(name)
        alpha, _, p = growth_envelope(self.cost)
        p_conj = p / (p - 1.0)
        samples = self._holder_samples()
        worst, worst_step, worst_tol = 0.0, -1, 0.0
        for i, m1 in enumerate(samples[:-1]):
            later = samples[i + 1:]
            gaps = np.sum(np.abs(self.states[later] - self.states[m1]), axis=1) / self.k
            elapsed = (later - m1) * self.tau
            bound = (elapsed + self.tau) ** (1.0 / p_conj) * alpha ** (-1.0 / p) * self.budget ** (1.0 / p)
            excess = gaps - bound * (1.0 + BOUND_RTOL)
            j = int(np.argmax(excess))
            worst_tol = max(worst_tol, float(bound.max() * BOUND_RTOL))
            if excess[j] > worst:
                worst, worst_step = float(excess[j]), int(later[j])
        return InvariantCheck(name=name, worst=worst, step=worst_step, passed=worst == 0.0, tolerance=worst_tol)

    def _el_arguments(self) -> np.ndarray:
        return np.array([el_argument(self.energy, s) for s in self.trajectory.states[1:]])

    def entropy_bounds(self) -> List[InvariantCheck]:
        if self.n_steps == 0:
            return [_not_applicable("entropy_bound"), _not_applicable("entropy_bound_dual")]
        args = self._el_arguments()
        bound = None
        if self.cost.is_flux_limiting:
            # beta is taken on the speeds the run actually reached
            observed = float(np.abs(self.displacements).max()) / self.tau
            bound = min(observed, float(np.nextafter(self.cost.gamma, 0.0)))
        alpha, beta, p = growth_envelope(self.cost, bound)
        p_conj = p / (p - 1.0)

        per_step = self.tau * np.sum(np.abs(args) ** p_conj, axis=1) / self.k
        rhs = beta ** (1.0 / (p - 1.0)) * self.budget
        primal = _aggregate("entropy_bound", per_step, rhs, BOUND_RTOL * (1.0 + rhs))

        velocities = np.abs(np.asarray(dual_prime(self.cost, args))) ** p
        per_step_dual = self.tau * np.sum(velocities, axis=1) / self.k
        rhs_dual = self.budget / alpha
        dual = _aggregate("entropy_bound_dual", per_step_dual, rhs_dual, BOUND_RTOL * (1.0 + rhs_dual))
        return [primal, dual]

    def el_residual(self) -> InvariantCheck:
        if self.n_steps == 0:
            return _not_applicable("el_residual")
        args = self._el_arguments()
        speeds = self.displacements[:, 1:-1] / self.tau
        spread = self.k * self.grad_norms[:, None] + 1e-13 * (1.0 + np.abs(args))
        width = np.asarray(dual_prime(self.cost, args + spread)) - np.asarray(dual_prime(self.cost, args - spread))
        tol = 10.0 * width + 1e-12
        residual = np.abs(speeds - np.asarray(dual_prime(self.cost, args)))
        per_step = np.maximum(0.0, residual - tol).max(axis=1, initial=0.0)
        return _check("el_residual", per_step, float(tol.max(initial=0.0)))

    def endpoints_pinned(self) -> InvariantCheck:
        drift = np.maximum(np.abs(self.states[:, 0] - self.a), np.abs(self.states[:, -1] - self.b))
        return _check("endpoints_pinned", drift, 0.0, steps=np.arange(drift.size))

    def run(self) -> AuditReport:
        items = [self.energy_dissipation(), self.energy_inequality()]
        items += self.dx_principles()
        items += [self.d2x_principle(), self.flux_limit(), self.holder_bound()]
        items += self.entropy_bounds()
        items += [self.el_residual(), self.endpoints_pinned()]
        report = AuditReport(items=items)
        failed = [it.name for it in items if not it.passed]
        if failed:
            logger.warning(f"Audit failed: {', '.join(failed)}")
        else:
            logger.info(f"Audit passed ({sum(it.applicable for it in items)} applicable invariants)")
        return report


def audit(trajectory: Trajectory, cost: CostModel, energy: EnergyModel, cfg: JkoConfig) -> AuditReport:
    return TrajectoryAuditor(trajectory, cost, energy, cfg).run()
