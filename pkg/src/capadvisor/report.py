"""Report tables: baseline profile, metric series, per-task comparison, projection.

CSV outputs carry full precision (``repr`` floats). Text renderings round
percents to two decimals and print energy as a positive *reduction* and
runtime as a positive *increase*.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from ._util import atomic_write_text
from .metrics import (
    Metric,
    MetricSeries,
    Projection,
    aggregate_projection,
    build_recommendations,
    compute_series,
)
from .model import IDLE_TASK, ProfileMatrix, Recommendation, TaskProfile, ValidationReport, validate_matrix

SERIES_COLUMNS = {
    "both": ["task", "cap_w", "sed", "n_energy", "n_runtime", "distance"],
    "sed": ["task", "cap_w", "sed"],
    "ed": ["task", "cap_w", "n_energy", "n_runtime", "distance"],
}
COMPARISON_COLUMNS = {
    "both": ["task", "sed_cap_w", "ed_cap_w", "sed_energy_pct", "ed_energy_pct",
             "sed_runtime_pct", "ed_runtime_pct"],
    "sed": ["task", "sed_cap_w", "sed_energy_pct", "sed_runtime_pct"],
    "ed": ["task", "ed_cap_w", "ed_energy_pct", "ed_runtime_pct"],
}


def report_order(matrix: ProfileMatrix) -> list[str]:
    """Tasks by descending baseline energy, the idle phase last."""
    def key(task):
        return (task == IDLE_TASK, -matrix.baseline(task).total_energy)
    return sorted(matrix.tasks, key=key)


@dataclass
class ReportBundle:
    matrix: ProfileMatrix
    baseline_table: list[TaskProfile]
    series: dict[str, MetricSeries]
    comparison: list[Recommendation]
    projections: dict[Metric, Projection]
    validation: ValidationReport
    weighted_projections: dict[Metric, Projection] | None = None


def build_report(matrix: ProfileMatrix, weighted: bool = False) -> ReportBundle:
    validation = validate_matrix(matrix)
    order = report_order(matrix)
    series = compute_series(matrix)
    recs = {r.task: r for r in build_recommendations(matrix, series)}
    comparison = [recs[t] for t in order]
    weighted_proj = None
    if weighted:
        weighted_proj = aggregate_projection(comparison, {t: matrix.baseline(t) for t in order})
    return ReportBundle(
        matrix=matrix,
        baseline_table=[matrix.baseline(t) for t in order],
        series={t: series[t] for t in order},
        comparison=comparison,
        projections=aggregate_projection(comparison),
        validation=validation,
        weighted_projections=weighted_proj,
    )


def _pct(x: float) -> str:
    return f"{x + 0.0:.2f}"  # + 0.0 turns -0.0 into 0.0


def _csv(rows: Sequence[Sequence], header: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _text_table(header: Sequence[str], rows: Sequence[Sequence[str]], title: str = "") -> str:
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h) for i, h in enumerate(header)]
    def fmt(cells):
        first = cells[0].ljust(widths[0])
        rest = [c.rjust(w) for c, w in zip(cells[1:], widths[1:])]
        return " | ".join([first, *rest]).rstrip()
    lines = [title] if title else []
    lines.append(fmt(header))
    lines.append("-+-".join("-" * w for w in widths))
    lines.extend(fmt(r) for r in rows)
    return "\n".join(lines) + "\n"


def baseline_csv(bundle: ReportBundle) -> str:
    rows = [[p.task, repr(p.total_runtime), p.call_count, repr(p.total_energy), repr(p.avg_power)]
            for p in bundle.baseline_table]
    return _csv(rows, ["task", "total_time_s", "calls", "total_energy_j", "avg_power_w"])


def baseline_text(bundle: ReportBundle) -> str:
    rows = [[p.task, f"{p.total_runtime:,.2f}", f"{p.call_count:,}", f"{p.total_energy:,.2f}",
             f"{p.avg_power:,.2f}"] for p in bundle.baseline_table]
    title = f"Measurements at the baseline cap ({bundle.matrix.baseline_cap:,} W)"
    return _text_table(["Task", "Total Time (s)", "# Calls", "Total Energy (J)", "Avg. Power (W)"],
                       rows, title)


def series_csv(bundle: ReportBundle, metric: str = "both") -> str:
    cols = SERIES_COLUMNS[metric]
    rows = []
    for s in bundle.series.values():
        for p in s.points:
            rec = {"task": p.task, "cap_w": p.cap, "sed": repr(p.sed), "n_energy": repr(p.n_energy),
                   "n_runtime": repr(p.n_runtime), "distance": repr(p.distance)}
            rows.append([rec[c] for c in cols])
    return _csv(rows, cols)


def comparison_csv(bundle: ReportBundle, metric: str = "both") -> str:
    cols = COMPARISON_COLUMNS[metric]
    rows = []
    for r in bundle.comparison:
        rec = {"task": r.task, "sed_cap_w": r.sed_cap, "ed_cap_w": r.ed_cap,
               "sed_energy_pct": repr(r.sed_energy_pct), "ed_energy_pct": repr(r.ed_energy_pct),
               "sed_runtime_pct": repr(r.sed_runtime_pct), "ed_runtime_pct": repr(r.ed_runtime_pct)}
        rows.append([rec[c] for c in cols])
    return _csv(rows, cols)


def comparison_text(bundle: ReportBundle, metric: str = "both") -> str:
    metrics = ["sed", "ed"] if metric == "both" else [metric]
    header = ["GPU task"]
    header += [f"Cap (W) {m.upper()}" for m in metrics]
    header += [f"Energy red. (%) {m.upper()}" for m in metrics]
    header += [f"Runtime inc. (%) {m.upper()}" for m in metrics]
    rows = []
    for r in bundle.comparison:
        row = [r.task]
        row += [str(getattr(r, f"{m}_cap")) for m in metrics]
        row += [_pct(-getattr(r, f"{m}_energy_pct")) for m in metrics]
        row += [_pct(getattr(r, f"{m}_runtime_pct")) for m in metrics]
        rows.append(row)
    title = (f"Runtime increase (%) and energy reduction (%) at the selected cap "
             f"vs the baseline ({bundle.matrix.baseline_cap} W)")
    return _text_table(header, rows, title)


def _projection_items(bundle: ReportBundle, metric: str):
    keep = [Metric.SED, Metric.ED] if metric == "both" else [Metric(metric)]
    items = [bundle.projections[m] for m in keep]
    if bundle.weighted_projections:
        items += [bundle.weighted_projections[m] for m in keep]
    return items


def projection_csv(bundle: ReportBundle, metric: str = "both") -> str:
    rows = [[p.metric.value, repr(p.energy_pct_sum), repr(p.runtime_pct_sum), "weighted" if p.weighted else "sum"]
            for p in _projection_items(bundle, metric)]
    return _csv(rows, ["metric", "energy_reduction_pct", "runtime_increase_pct", "aggregation"])


def projection_text(bundle: ReportBundle, metric: str = "both") -> str:
    lines = ["Aggregate projection over all tasks (idealized: no cap-switching overhead)"]
    for p in _projection_items(bundle, metric):
        lines.append(f"  {p.label}: energy reduction {_pct(p.energy_pct_sum)} %, "
                     f"runtime increase {_pct(p.runtime_pct_sum)} %")
    return "\n".join(lines) + "\n"


def write_report(bundle: ReportBundle, out_dir, metric: str = "both", figures: bool = True) -> list[Path]:
    """Write every table (and optionally the figures); returns the paths written."""
    if metric not in SERIES_COLUMNS:
        raise ValueError(f"metric must be one of {sorted(SERIES_COLUMNS)}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    outputs = {
        "baseline_table.csv": baseline_csv(bundle),
        "baseline_table.txt": baseline_text(bundle),
        "metric_series.csv": series_csv(bundle, metric),
        "comparison.csv": comparison_csv(bundle, metric),
        "comparison.txt": comparison_text(bundle, metric),
        "projection.csv": projection_csv(bundle, metric),
        "projection.txt": projection_text(bundle, metric),
        "validation.txt": bundle.validation.summary() + "\n",
    }
    written = []
    for name, text in outputs.items():
        atomic_write_text(out / name, text)
        written.append(out / name)
    if figures:
        from .plotting import render_figures
        written += render_figures(bundle, out, metric)
    return written
