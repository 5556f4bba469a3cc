import logging
from pathlib import Path
from typing import List, Tuple
import numpy as np
import pandas as pd

from src.core.exceptions import AuditError
from src.models.schema import (
    AuditReport,
    ConvergenceResult,
    DIAGNOSTIC_COLUMNS,
    IdfVector,
    StepReport,
    Trajectory,
)
from src.solver.grid import to_density

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"

CHARACTERISTICS_FILE = "characteristics.csv"
DIAGNOSTICS_FILE = "diagnostics.csv"
RESIDUALS_FILE = "residuals.csv"
SNAPSHOTS_FILE = "snapshots.csv"
AUDIT_FILE = "audit.txt"
CONVERGENCE_FILE = "convergence.csv"


def _write(frame: pd.DataFrame, path: Path):
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")


def density_frame(x: IdfVector) -> pd.DataFrame:
    density = to_density(x)
    return pd.DataFrame({
        "x_left": density.breakpoints[:-1],
        "x_right": density.breakpoints[1:],
        "u": density.cell_values,
    })


def idf_frame(x: IdfVector) -> pd.DataFrame:
    return pd.DataFrame({"xi": np.arange(x.k + 1) / x.k, "x": x.values})


def snapshot_names(n: int) -> Tuple[str, str]:
    return f"density_n{n:06d}.csv", f"idf_n{n:06d}.csv"


def write_snapshots(out_dir: Path, trajectory: Trajectory, steps: List[int]) -> List[Path]:
    written: List[Path] = []
    index = []
    for n in steps:
        density_name, idf_name = snapshot_names(n)
        state = trajectory.states[n]
        _write(density_frame(state), out_dir / density_name)
        _write(idf_frame(state), out_dir / idf_name)
        index.append({"n": n, "t": n * trajectory.tau, "density_file": density_name, "idf_file": idf_name})
        written += [out_dir / density_name, out_dir / idf_name]
    _write(pd.DataFrame(index, columns=["n", "t", "density_file", "idf_file"]), out_dir / SNAPSHOTS_FILE)
    return written


def write_characteristics(out_dir: Path, trajectory: Trajectory) -> Path:
    states = trajectory.matrix()
    steps, k1 = states.shape
    frame = pd.DataFrame({
        "t": np.repeat(trajectory.times, k1),
        "i": np.tile(np.arange(k1), steps),
        "x": states.ravel(),
    })
    path = out_dir / CHARACTERISTICS_FILE
    _write(frame, path)
    return path


def write_diagnostics(out_dir: Path, reports: List[StepReport]) -> Path:
    frame = pd.DataFrame([r.model_dump() for r in reports], columns=DIAGNOSTIC_COLUMNS + ["grad_norm"])
    path = out_dir / DIAGNOSTICS_FILE
    _write(frame[DIAGNOSTIC_COLUMNS], path)
    _write(frame[["n", "grad_norm"]], out_dir / RESIDUALS_FILE)
    return path


def write_audit(out_dir: Path, report: AuditReport) -> Path:
    path = out_dir / AUDIT_FILE
    path.write_text("\n".join(report.to_lines()) + "\n", encoding="utf-8")
    return path


def convergence_frame(result: ConvergenceResult) -> pd.DataFrame:
    return pd.DataFrame(
        [{"axis": result.axis, "level": lv.level, "err_idf": lv.err_idf, "err_density": lv.err_density} for lv in result.levels],
        columns=["axis", "level", "err_idf", "err_density"],
    )


def write_convergence(out_dir: Path, result: ConvergenceResult) -> Path:
    path = out_dir / CONVERGENCE_FILE
    _write(convergence_frame(result), path)
    return path


def read_csv(path: Path) -> pd.DataFrame:
    return pd.read_csv(path, float_precision="round_trip")


def read_trajectory(out_dir: Path, a: float, b: float, tau: float) -> Trajectory:
    """Rebuild states from characteristics.csv and step reports from diagnostics.csv + residuals.csv."""
    try:
        chars = read_csv(out_dir / CHARACTERISTICS_FILE)
        diag = read_csv(out_dir / DIAGNOSTICS_FILE)
        resid = read_csv(out_dir / RESIDUALS_FILE)
    except FileNotFoundError as exc:
        raise AuditError(f"incomplete run directory {out_dir}: {exc.filename} is missing")
    if list(diag.columns) != DIAGNOSTIC_COLUMNS:
        raise AuditError(f"{DIAGNOSTICS_FILE} has header {list(diag.columns)}, expected {DIAGNOSTIC_COLUMNS}")

    chars["n"] = np.rint(chars["t"].to_numpy() / tau).astype(int)
    grid = chars.pivot(index="n", columns="i", values="x").sort_index()
    if grid.isna().any().any():
        raise AuditError(f"{CHARACTERISTICS_FILE} is missing (step, index) entries")
    states = [IdfVector(a=a, b=b, values=row) for row in grid.to_numpy(float)]

    merged = diag.merge(resid, on="n", how="left").fillna({"grad_norm": 0.0})
    reports = [StepReport(**{key: row[key] for key in DIAGNOSTIC_COLUMNS + ["grad_norm"]}) for row in merged.to_dict("records")]
    return Trajectory(tau=tau, states=states, reports=reports)
