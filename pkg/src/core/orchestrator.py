import asyncio
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from src.analytics.audit import audit
from src.analytics.convergence import convergence_study, slope_in_band
from src.core.config import format_config, load_config, settings
from src.core.exceptions import AuditError, LagFlowError
from src.models.schema import AuditReport, ConvergenceResult, RunConfig, Trajectory
from src.reporting.csv_io import (
    read_trajectory,
    write_audit,
    write_characteristics,
    write_convergence,
    write_diagnostics,
    write_snapshots,
)
from src.reporting.pdf_gen import generate_run_report
from src.reporting.plot_script import write_convergence_script, write_solve_script
from src.solver.scenario import solve

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_ERROR = 3

RUN_CONFIG_FILE = "run.cfg"
REPORT_FILE = "report.pdf"


class ExperimentOrchestrator:
    """Drives solve / converge / audit runs and owns everything they write to disk."""

    def __init__(self, output_dir: Optional[str] = None, write_pdf: bool = True):
        self.output_override = output_dir or settings.LAGFLOW_OUT
        self.write_pdf = write_pdf

    def output_dir(self, cfg: RunConfig) -> Path:
        out = Path(self.output_override or cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        return out

    def _fail(self, exc: Exception) -> int:
        logger.error(f"{type(exc).__name__}: {exc}")
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR

    def write_run(self, out: Path, cfg: RunConfig, trajectory: Trajectory) -> AuditReport:
        (out / RUN_CONFIG_FILE).write_text(format_config(cfg), encoding="utf-8")
        write_snapshots(out, trajectory, cfg.snapshot_steps)
        write_characteristics(out, trajectory)
        write_diagnostics(out, trajectory.reports)
        write_solve_script(out, cfg)
        report = audit(trajectory, cfg.cost, cfg.energy, cfg.jko)
        write_audit(out, report)
        if self.write_pdf:
            generate_run_report(str(out / REPORT_FILE), cfg, trajectory.reports, report)
        return report

    async def run_solve(self, cfg: RunConfig) -> int:
        """Exit status 0 iff the solve completes and every audited invariant holds."""
        try:
            out = self.output_dir(cfg)
            logger.info(f"Solving into {out} (k={cfg.k}, tau={cfg.tau}, T={cfg.t_end})")
            loop = asyncio.get_running_loop()
            trajectory = await loop.run_in_executor(None, solve, cfg)
            report = self.write_run(out, cfg, trajectory)
        except LagFlowError as exc:
            return self._fail(exc)
        for line in report.to_lines():
            print(line)
        return EXIT_OK if report.passed else EXIT_CHECK_FAILED

    async def run_convergence(self, cfg: RunConfig, axis: str, levels: Sequence[float], reference: float) -> int:
        """Exit status 0 iff the IDF-error slope lies in the acceptance band."""
        try:
            out = self.output_dir(cfg)
            result: ConvergenceResult = await convergence_study(axis, cfg, levels, reference)
            write_convergence(out, result)
            write_convergence_script(out, axis)
        except LagFlowError as exc:
            return self._fail(exc)
        print(f"axis={result.axis} slope_idf={result.fitted_slope:.6f} slope_density={result.fitted_slope_density:.6f}")
        return EXIT_OK if slope_in_band(result.fitted_slope) else EXIT_CHECK_FAILED

    async def run_audit(self, run_dir: str) -> int:
        """Re-audit a finished run directory from its run.cfg and CSV files."""
        try:
            directory = Path(run_dir)
            cfg_path = directory / RUN_CONFIG_FILE
            if not cfg_path.is_file():
                raise AuditError(f"{run_dir} has no {RUN_CONFIG_FILE}")
            cfg = load_config(str(cfg_path))
            trajectory = read_trajectory(directory, cfg.a, cfg.b, cfg.tau)
            report = audit(trajectory, cfg.cost, cfg.energy, cfg.jko)
            write_audit(directory, report)
        except LagFlowError as exc:
            return self._fail(exc)
        for line in report.to_lines():
            print(line)
        return EXIT_OK if report.passed else EXIT_CHECK_FAILED
