from typing import Optional


class LagFlowError(Exception):
    """Base class for every error raised by the solver stack."""


class CostDomainError(LagFlowError):
    pass


class EnergyDomainError(LagFlowError):
    pass


class GridError(LagFlowError):
    pass


class InfeasibleIterateError(LagFlowError):
    def __init__(self, message: str, index: int):
        super().__init__(f"{message} (index {index})")
        self.index = index


class PivotBreakdownError(LagFlowError):
    def __init__(self, index: int, pivot: float):
        super().__init__(f"Tridiagonal pivot breakdown at row {index}: pivot={pivot!r}")
        self.index = index
        self.pivot = pivot


class NewtonConvergenceError(LagFlowError):
    def __init__(self, iterations: int, grad_norm: float, reason: str = "iteration cap reached"):
        super().__init__(f"Newton did not converge after {iterations} iterations ({reason}), |grad|_inf={grad_norm:.3e}")
        self.iterations = iterations
        self.grad_norm = grad_norm


class StepFailedError(LagFlowError):
    def __init__(self, step: int, cause: Exception):
        super().__init__(f"Time step {step} failed: {cause}")
        self.step = step
        self.cause = cause


class ConfigError(LagFlowError):
    def __init__(self, message: str, line: Optional[int] = None, column: int = 0):
        location = f"line {line}, column {column}: " if line is not None else ""
        super().__init__(f"{location}{message}")
        self.line = line
        self.column = column


class AuditError(LagFlowError):
    pass


class ConvergenceError(LagFlowError):
    pass
