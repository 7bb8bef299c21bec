"""Decision metrics over a profile matrix and per-task cap selection.

Two metrics are computed per (task, cap):

* speedup-energy-delay, ``(r_base * e_base) / (r_cap * e_cap)``; higher is better.
* Euclidean distance of the per-task min-max normalized energy and runtime
  from the joint minimum ``(0, 0)``; lower is better.

Both selections break exact ties toward the lower cap.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from .model import MetricPoint, ProfileMatrix, Recommendation, TaskProfile


class Metric(str, enum.Enum):
    SED = "sed"
    ED = "ed"


def speedup_energy_delay(baseline: tuple[float, float], candidate: tuple[float, float]) -> float:
    """``(runtime, energy)`` pairs in, baseline-over-candidate product ratio out."""
    r1, e1 = baseline
    rn, en = candidate
    if min(r1, e1, rn, en) <= 0:
        raise ValueError(f"speedup-energy-delay needs positive inputs, got {baseline} and {candidate}")
    return (r1 * e1) / (rn * en)


class Normalized(NamedTuple):
    values: np.ndarray
    indifferent: bool


def _normalize_rows(arr: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Min-max along the last axis; constant rows map to 0 and are flagged."""
    lo = arr.min(axis=-1, keepdims=True)
    hi = arr.max(axis=-1, keepdims=True)
    span = hi - lo
    flat = span == 0
    out = np.divide(arr - lo, span, out=np.zeros_like(arr, dtype=np.float64), where=~flat)
    return out, flat[..., 0]


def min_max_normalize(values: Iterable[float]) -> Normalized:
    """Scale one task's per-cap values onto [0, 1].

    If every value is equal the result is all zeros and ``indifferent`` is set.
    """
    arr = np.asarray(list(values), dtype=np.float64)
    if arr.ndim != 1 or arr.size < 2:
        raise ValueError("min-max normalization needs values for at least 2 caps")
    out, flat = _normalize_rows(arr)
    return Normalized(out, bool(flat))


def euclidean_distance(n_energy: float, n_runtime: float) -> float:
    for name, v in (("n_energy", n_energy), ("n_runtime", n_runtime)):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"{name}={v!r} is outside [0, 1]")
    return math.sqrt(n_energy * n_energy + n_runtime * n_runtime)


def distance_table(energy: np.ndarray, runtime: np.ndarray):
    """Vectorized normalization + distance over the last (cap) axis.

    Returns ``(n_energy, n_runtime, distance, energy_flat, runtime_flat)``.
    """
    n_e, e_flat = _normalize_rows(np.asarray(energy, dtype=np.float64))
    n_r, r_flat = _normalize_rows(np.asarray(runtime, dtype=np.float64))
    # sqrt of a sum of two squares, each <= 1, stays <= sqrt(2) in IEEE arithmetic
    dist = np.sqrt(n_e * n_e + n_r * n_r)
    return n_e, n_r, dist, e_flat, r_flat


@dataclass(frozen=True)
class MetricSeries:
    task: str
    points: tuple[MetricPoint, ...]
    energy_indifferent: bool = False
    runtime_indifferent: bool = False

    @property
    def indifferent(self) -> bool:
        """True when neither energy nor runtime varies across caps."""
        return self.energy_indifferent and self.runtime_indifferent

    @property
    def caps(self) -> list[int]:
        return [p.cap for p in self.points]

    def point(self, cap: int) -> MetricPoint:
        for p in self.points:
            if p.cap == cap:
                return p
        raise KeyError(cap)


def _grid(matrix: ProfileMatrix) -> tuple[np.ndarray, np.ndarray]:
    shape = (len(matrix.tasks), len(matrix.caps))
    energy = np.empty(shape)
    runtime = np.empty(shape)
    for i, task in enumerate(matrix.tasks):
        for j, cap in enumerate(matrix.caps):
            cell = matrix.cells.get((task, cap))
            if cell is None:
                raise ValueError(f"missing cell ({task!r}, {cap} W)")
            energy[i, j] = cell.total_energy
            runtime[i, j] = cell.total_runtime
    return energy, runtime


def compute_series(matrix: ProfileMatrix) -> dict[str, MetricSeries]:
    """Both metrics for every (task, cap), keyed by task in matrix order."""
    if matrix.baseline_cap not in matrix.caps:
        raise ValueError(f"baseline cap {matrix.baseline_cap} W is not in the matrix")
    energy, runtime = _grid(matrix)
    b = matrix.caps.index(matrix.baseline_cap)
    for i, task in enumerate(matrix.tasks):
        if energy[i, b] <= 0 or runtime[i, b] <= 0:
            raise ValueError(f"baseline cell ({task!r}, {matrix.baseline_cap} W) has zero runtime or energy")
        bad = np.flatnonzero((energy[i] <= 0) | (runtime[i] <= 0))
        if bad.size:
            raise ValueError(f"cell ({task!r}, {matrix.caps[bad[0]]} W) has zero runtime or energy")
    # the baseline column divides itself, so sed there is exactly 1.0
    sed = (runtime[:, [b]] * energy[:, [b]]) / (runtime * energy)
    sed[:, b] = 1.0
    if len(matrix.caps) >= 2:
        n_e, n_r, dist, e_flat, r_flat = distance_table(energy, runtime)
    else:
        n_e = n_r = dist = np.zeros_like(energy)
        e_flat = r_flat = np.ones(len(matrix.tasks), dtype=bool)
    out = {}
    for i, task in enumerate(matrix.tasks):
        pts = tuple(
            MetricPoint(task, cap, float(sed[i, j]), float(n_e[i, j]), float(n_r[i, j]), float(dist[i, j]))
            for j, cap in enumerate(matrix.caps))
        out[task] = MetricSeries(task, pts, bool(e_flat[i]), bool(r_flat[i]))
    return out


def select_sed(series: MetricSeries) -> int:
    """Cap with the highest speedup-energy-delay (lowest cap on ties)."""
    best = series.points[0]
    for p in series.points[1:]:
        if p.sed > best.sed or (p.sed == best.sed and p.cap < best.cap):
            best = p
    return best.cap


def select_ed(series: MetricSeries) -> int:
    """Cap with the smallest normalized distance (lowest cap on ties)."""
    best = series.points[0]
    for p in series.points[1:]:
        if p.distance < best.distance or (p.distance == best.distance and p.cap < best.cap):
            best = p
    return best.cap


def percent_change(candidate: float, baseline: float) -> float:
    """Signed change of ``candidate`` relative to ``baseline``, in percent."""
    if baseline <= 0:
        raise ValueError(f"percent change needs a positive baseline, got {baseline!r}")
    return (candidate - baseline) / baseline * 100.0


def build_recommendations(matrix: ProfileMatrix,
                          series: Mapping[str, MetricSeries] | None = None) -> list[Recommendation]:
    if series is None:
        series = compute_series(matrix)
    recs = []
    for task in matrix.tasks:
        s = series[task]
        base = matrix.baseline(task)
        sed_cap, ed_cap = select_sed(s), select_ed(s)
        sed_cell, ed_cell = matrix.cell(task, sed_cap), matrix.cell(task, ed_cap)
        recs.append(Recommendation(
            task, sed_cap, ed_cap,
            percent_change(sed_cell.total_energy, base.total_energy),
            percent_change(sed_cell.total_runtime, base.total_runtime),
            percent_change(ed_cell.total_energy, base.total_energy),
            percent_change(ed_cell.total_runtime, base.total_runtime),
        ))
    return recs


@dataclass(frozen=True)
class Projection:
    """Summed per-task changes for one metric.

    ``energy_pct_sum`` adds up energy *reductions* (positive = saved) and
    ``runtime_pct_sum`` adds up runtime *increases*. The plain sum assumes
    every task can switch cap with no overhead; it is an idealized upper
    estimate, not a whole-application prediction. With ``weighted`` set,
    each task's percent is weighted by its baseline share instead.
    """

    metric: Metric
    energy_pct_sum: float
    runtime_pct_sum: float
    weighted: bool = False

    @property
    def label(self) -> str:
        kind = "baseline-weighted" if self.weighted else "ideal overhead-free sum"
        return f"{self.metric.value.upper()} ({kind})"


def aggregate_projection(recommendations: Sequence[Recommendation],
                         baselines: Mapping[str, TaskProfile] | None = None) -> dict[Metric, Projection]:
    """Per-metric sums of energy reduction and runtime increase percents.

    Passing ``baselines`` switches to the weighted variant: energy percents
    weighted by baseline energy, runtime percents by baseline runtime.
    """
    if not recommendations:
        raise ValueError("aggregate_projection needs at least one recommendation")
    fields = {Metric.SED: ("sed_energy_pct", "sed_runtime_pct"),
              Metric.ED: ("ed_energy_pct", "ed_runtime_pct")}
    out = {}
    for metric, (e_attr, r_attr) in fields.items():
        energy_red = [-getattr(r, e_attr) for r in recommendations]
        runtime_inc = [getattr(r, r_attr) for r in recommendations]
        if baselines is None:
            out[metric] = Projection(metric, math.fsum(energy_red), math.fsum(runtime_inc))
            continue
        we = [baselines[r.task].total_energy for r in recommendations]
        wr = [baselines[r.task].total_runtime for r in recommendations]
        out[metric] = Projection(
            metric,
            math.fsum(w * v for w, v in zip(we, energy_red)) / math.fsum(we),
            math.fsum(w * v for w, v in zip(wr, runtime_inc)) / math.fsum(wr),
            weighted=True,
        )
    return out
