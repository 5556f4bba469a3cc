from fpdf import FPDF
from datetime import datetime

from src.models.schema import AuditReport, RunConfig, StepReport
from typing import List


class RunBriefingPDF(FPDF):
    """One-page briefing; every page carries the run's cost, grid and step in its header."""

    def __init__(self, cfg: RunConfig, passed: bool):
        super().__init__()
        self.run_cfg = cfg
        self.audit_passed = passed

    def header(self):
        self.set_font('helvetica', 'B', 15)
        self.cell(0, 10, f'LagFlow Run: {_cost_label(self.run_cfg)}, m={self.run_cfg.m:g}', border=False, align='C',
                  new_x="LMARGIN", new_y="NEXT")
        self.set_font('helvetica', size=10)
        self.cell(0, 6, f'k={self.run_cfg.k}, tau={self.run_cfg.tau:g}, T={self.run_cfg.t_end:g} on [{self.run_cfg.a:g}, {self.run_cfg.b:g}]',
                  align='C', new_x="LMARGIN", new_y="NEXT")
        self.ln(8)

    def footer(self):
        self.set_y(-15)
        self.set_font('helvetica', 'I', 8)
        verdict = "audit passed" if self.audit_passed else "audit FAILED"
        self.cell(0, 10, f'{self.run_cfg.output_dir} - {verdict} - page {self.page_no()}', align='C')


def _section(pdf: FPDF, title: str):
    pdf.set_font("helvetica", "B", 14)
    pdf.cell(0, 10, title, new_x="LMARGIN", new_y="NEXT")
    pdf.set_font("helvetica", size=11)


def _cost_label(cfg: RunConfig) -> str:
    if cfg.cost.kind == "relativistic":
        return f"relativistic, gamma={cfg.cost.gamma:g}"
    return f"p-power, p={cfg.cost.p:g}"


def generate_run_report(filename: str, cfg: RunConfig, reports: List[StepReport], audit: AuditReport):
    pdf = RunBriefingPDF(cfg, audit.passed)
    pdf.add_page()

    pdf.set_font("helvetica", size=12)
    pdf.cell(0, 10, f"Date: {datetime.now().strftime('%Y-%m-%d %H:%M')}", new_x="LMARGIN", new_y="NEXT")
    pdf.ln(5)

    _section(pdf, "1. Configuration")
    setup = {
        "domain": f"[{cfg.a:g}, {cfg.b:g}]",
        "k": cfg.k,
        "tau / T": f"{cfg.tau:g} / {cfg.t_end:g} ({cfg.jko.n_steps} steps)",
        "cost": _cost_label(cfg),
        "entropy exponent m": f"{cfg.m:g}",
        "potential": cfg.potential.kind,
    }
    for key, val in setup.items():
        pdf.cell(100, 8, f"{key}: {val}", new_x="LMARGIN", new_y="NEXT")
    pdf.ln(5)

    _section(pdf, "2. Final Step")
    if reports:
        last = reports[-1]
        pdf.multi_cell(0, 8, (
            f"t={last.t:g}: energy {last.energy:.10g}, dx in [{last.min_dx:.4g}, {last.max_dx:.4g}], "
            f"max speed {max(r.max_speed for r in reports):.6g}, "
            f"Newton iterations {sum(r.newton_iters for r in reports)} in total."
        ))
    else:
        pdf.cell(0, 8, "No steps were taken.", new_x="LMARGIN", new_y="NEXT")
    pdf.ln(5)

    _section(pdf, f"3. Invariant Audit ({'PASS' if audit.passed else 'FAIL'})")
    pdf.set_font("courier", size=9)
    for item in audit.items:
        status = "n/a " if not item.applicable else ("pass" if item.passed else "FAIL")
        pdf.cell(0, 6, f"{status}  {item.name:<20} worst={item.worst:.3e} step={item.step}", new_x="LMARGIN", new_y="NEXT")

    pdf.output(filename)
