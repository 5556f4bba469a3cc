from pathlib import Path
from typing import List

from src.models.schema import RunConfig
from src.reporting.csv_io import CHARACTERISTICS_FILE, CONVERGENCE_FILE, DIAGNOSTICS_FILE, snapshot_names

SOLVE_SCRIPT = "plot_solve.gp"
CONVERGENCE_SCRIPT = "plot_convergence.gp"


def _header(output: str) -> List[str]:
    return [
        "# gnuplot companion script; run with: gnuplot " + output.replace(".png", ".gp"),
        "set datafile separator ','",
        "set key autotitle columnhead",
        "set terminal pngcairo size 1400,500",
        f"set output '{output}'",
    ]


def write_solve_script(out_dir: Path, cfg: RunConfig) -> Path:
    """Density snapshots, characteristics and the flux/energy diagnostics in a three-panel figure."""
    lines = _header("solve.png")
    lines += ["set multiplot layout 1,3", f"set xrange [{cfg.a}:{cfg.b}]", "set title 'density'", "set key off"]
    plots = []
    for n in sorted(cfg.snapshot_steps):
        density_file, _ = snapshot_names(n)
        plots.append(f"'{density_file}' using (($1+$2)/2):3 with steps")
    lines.append("plot " + ", \\\n     ".join(plots) if plots else "# no snapshots")
    stride = max(1, cfg.k // 50)
    lines += [
        "set title 'characteristics'",
        "set autoscale y",
        f"plot '{CHARACTERISTICS_FILE}' using 3:(int($2) % {stride} == 0 ? $1 : 1/0) with dots",
        "set title 'diagnostics'",
        "unset xrange",
        "set key on",
    ]
    if cfg.cost.is_flux_limiting:
        lines.append(f"plot '{DIAGNOSTICS_FILE}' using 2:9 with lines title 'max speed', {cfg.cost.gamma} dashtype 2 title 'speed limit'")
    else:
        lines.append(f"plot '{DIAGNOSTICS_FILE}' using 2:3 with lines title 'energy'")
    lines.append("unset multiplot")
    path = out_dir / SOLVE_SCRIPT
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def write_convergence_script(out_dir: Path, axis: str) -> Path:
    lines = _header("convergence.png")
    mesh = "(1/$2)" if axis == "grid" else "2"
    lines += [
        "set logscale xy",
        f"set xlabel '{'1/k' if axis == 'grid' else 'tau'}'",
        f"plot '{CONVERGENCE_FILE}' using {mesh}:3 with linespoints title 'IDF error', \\",
        f"     '{CONVERGENCE_FILE}' using {mesh}:4 with linespoints title 'density error'",
    ]
    path = out_dir / CONVERGENCE_SCRIPT
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
