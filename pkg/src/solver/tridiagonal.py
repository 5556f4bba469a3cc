from typing import NamedTuple
import numpy as np
from scipy.linalg import LinAlgError, solveh_banded

from src.core.exceptions import PivotBreakdownError


class SymmetricTridiagonal(NamedTuple):
    diag: np.ndarray
    off: np.ndarray

    @property
    def order(self) -> int:
        return self.diag.size

    def to_dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.off, 1) + np.diag(self.off, -1)

    def matvec(self, v: np.ndarray) -> np.ndarray:
        out = self.diag * v
        out[:-1] += self.off * v[1:]
        out[1:] += self.off * v[:-1]
        return out


def _first_bad_pivot(diag: np.ndarray, off: np.ndarray):
    """LDL^T sweep; returns (index, pivot) of the first non-positive pivot, or None."""
    pivot = diag[0]
    if not pivot > 0.0:
        return 0, float(pivot)
    for i in range(1, diag.size):
        pivot = diag[i] - off[i - 1] * off[i - 1] / pivot
        if not pivot > 0.0:
            return i, float(pivot)
    return None


def solve_tridiagonal(diag: np.ndarray, off: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """
    Solve A y = rhs for symmetric positive definite tridiagonal A in O(n).
    diag has length n, off length n-1 (the super/sub diagonal).
    Raises PivotBreakdownError when A is not positive definite.
    """
    diag = np.asarray(diag, dtype=float)
    off = np.asarray(off, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    n = diag.size
    if off.size != max(n - 1, 0) or rhs.shape[0] != n:
        raise ValueError(f"inconsistent tridiagonal shapes: diag {diag.shape}, off {off.shape}, rhs {rhs.shape}")
    if not (np.all(np.isfinite(diag)) and np.all(np.isfinite(off))):
        bad = int(np.argmax(~np.isfinite(diag))) if not np.all(np.isfinite(diag)) else int(np.argmax(~np.isfinite(off)))
        raise PivotBreakdownError(bad, float("nan"))

    banded = np.zeros((2, n))
    banded[0, 1:] = off
    banded[1, :] = diag
    try:
        return solveh_banded(banded, rhs, check_finite=False)
    except LinAlgError:
        located = _first_bad_pivot(diag, off)
        index, pivot = located if located is not None else (n - 1, 0.0)
        raise PivotBreakdownError(index, pivot)
