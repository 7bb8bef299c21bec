"""Synthetic power/task traces under CPU-first power steering with DVFS.

Model (per GPU task at a superchip cap):

* the CPU is served first; the GPU gets ``cap - cpu_power``,
* GPU power at frequency ratio ``f`` is ``idle + (peak - idle) * f**alpha``
  and ``f`` is lowered until that fits the GPU budget,
* runtime stretches as ``base * (c / f + 1 - c)`` for compute intensity ``c``.

During the gaps between tasks the GPU idles and the CPU bursts to
``cpu_burst_power`` (again served first, bounded by the cap).

Synthesized signals are piecewise constant. Besides the regular sampling
grid, each power step is marked by a sample ``edge_ns`` before the step
(old level) and one at the step (new level), so trapezoidal integration of
the trace recovers the closed-form energy up to an ``edge_ns``-wide ramp.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from ._util import atomic_open, thread_count
from .ingest import (
    NS_PER_S,
    ExperimentManifest,
    PowerStream,
    RunFiles,
    RunRecord,
    write_interval_trace,
    write_manifest,
    write_power_trace,
)
from .model import IDLE_TASK, Component, ProfileMatrix, TaskInterval, TaskProfile


class InfeasibleCapError(ValueError):
    def __init__(self, cap: float, cpu_power: float):
        self.cap = cap
        self.cpu_power = cpu_power
        super().__init__(f"infeasible cap {cap:g} W: CPU demand is {cpu_power:g} W")


@dataclass(frozen=True)
class TaskSpec:
    name: str
    base_runtime: float  # s per invocation at full clock
    compute_intensity: float
    peak_power: float  # W at full clock
    invocations: int = 1
    gap_ns: int = 0  # idle gap after each invocation

    def __post_init__(self):
        if not 0.0 <= self.compute_intensity <= 1.0:
            raise ValueError(f"{self.name}: compute_intensity must be in [0, 1]")
        if self.base_runtime <= 0:
            raise ValueError(f"{self.name}: base_runtime must be positive")
        if self.invocations < 1:
            raise ValueError(f"{self.name}: invocations must be positive")
        if self.gap_ns < 0:
            raise ValueError(f"{self.name}: gap_ns must be non-negative")
        if self.name == IDLE_TASK:
            raise ValueError(f"task name {IDLE_TASK!r} is reserved for derived idle phases")


@dataclass(frozen=True)
class ChipSpec:
    gpu_idle_power: float = 50.0
    cpu_power: float = 70.0
    cpu_burst_power: float = 150.0
    alpha: float = 2.5
    min_frequency_ratio: float = 0.1

    def __post_init__(self):
        if self.gpu_idle_power < 0:
            raise ValueError("gpu_idle_power must be non-negative")
        if self.cpu_power < 0 or self.cpu_burst_power < 0:
            raise ValueError("CPU power levels must be non-negative")
        if self.alpha < 1:
            raise ValueError("alpha must be >= 1")
        if not 0 < self.min_frequency_ratio <= 1:
            raise ValueError("min_frequency_ratio must be in (0, 1]")


def _check_task(chip: ChipSpec, task: TaskSpec):
    if task.peak_power <= chip.gpu_idle_power:
        raise ValueError(f"{task.name}: peak_power must exceed the GPU idle power")


def model_power(f: float, chip: ChipSpec, task: TaskSpec) -> float:
    return chip.gpu_idle_power + (task.peak_power - chip.gpu_idle_power) * f ** chip.alpha


def model_runtime(base: float, c: float, f: float) -> float:
    if f <= 0:
        raise ValueError(f"frequency ratio must be positive, got {f!r}")
    return base * (c / f + (1.0 - c))


def effective_frequency(cap: float, chip: ChipSpec, task: TaskSpec) -> float:
    """Frequency ratio the GPU settles at under ``cap``."""
    _check_task(chip, task)
    if cap <= chip.cpu_power:
        raise InfeasibleCapError(cap, chip.cpu_power)
    budget = cap - chip.cpu_power
    if task.peak_power <= budget:
        return 1.0
    frac = (budget - chip.gpu_idle_power) / (task.peak_power - chip.gpu_idle_power)
    f = frac ** (1.0 / chip.alpha) if frac > 0 else 0.0
    return min(1.0, max(chip.min_frequency_ratio, f))


def idle_levels(cap: float, chip: ChipSpec) -> tuple[float, float]:
    """(cpu, gpu) power during GPU-idle gaps."""
    if cap <= chip.cpu_power:
        raise InfeasibleCapError(cap, chip.cpu_power)
    cpu = min(chip.cpu_burst_power, cap)
    return cpu, min(chip.gpu_idle_power, cap - cpu)


def invocation_ns(task: TaskSpec, f: float) -> int:
    return max(1, round(model_runtime(task.base_runtime, task.compute_intensity, f) * NS_PER_S))


@dataclass(frozen=True)
class _Segment:
    start: int
    end: int
    cpu: float
    gpu: float
    task: str | None


def schedule(workload: Sequence[TaskSpec], chip: ChipSpec, cap: float) -> list[_Segment]:
    """Back-to-back invocations in workload order, each followed by its gap."""
    idle_cpu, idle_gpu = idle_levels(cap, chip)
    segs = []
    t = 0
    for task in workload:
        f = effective_frequency(cap, chip, task)
        dur = invocation_ns(task, f)
        power = model_power(f, chip, task)
        for _ in range(task.invocations):
            segs.append(_Segment(t, t + dur, chip.cpu_power, power, task.name))
            t += dur
            if task.gap_ns:
                segs.append(_Segment(t, t + task.gap_ns, idle_cpu, idle_gpu, None))
                t += task.gap_ns
    return segs


def _sample_times(segs: list[_Segment], period_ns: int, edge_ns: int) -> np.ndarray:
    end = segs[-1].end
    grid = np.arange(0, end + 1, period_ns, dtype=np.int64)
    bounds = np.array([s.start for s in segs[1:]], dtype=np.int64)
    extra = [np.array([0, end], dtype=np.int64)]
    if edge_ns > 0 and bounds.size:
        extra += [bounds, np.maximum(bounds - edge_ns, 0)]
    return np.unique(np.concatenate([grid, *extra]))


def synthesize_run(workload: Sequence[TaskSpec], chip: ChipSpec, cap: float,
                   sample_period_ms: float = 5.0, noise: tuple[int, float] = (0, 0.0),
                   run_index: int = 0, edge_ns: int = 1) -> RunRecord:
    """Trace of one run: superchip and CPU streams plus task intervals.

    ``noise`` is ``(seed, relative sigma)``; samples get multiplicative
    Gaussian noise, interval boundaries never do. ``edge_ns=0`` disables
    the step-marking samples and leaves only the regular grid.
    """
    if sample_period_ms <= 0:
        raise ValueError("sample_period_ms must be positive")
    if not workload:
        raise ValueError("workload has no tasks")
    seed, sigma = noise
    period = max(1, round(sample_period_ms * 1_000_000))
    segs = schedule(workload, chip, cap)
    ts = _sample_times(segs, period, edge_ns)
    starts = np.array([s.start for s in segs], dtype=np.int64)
    idx = np.clip(np.searchsorted(starts, ts, side="right") - 1, 0, len(segs) - 1)
    cpu = np.array([s.cpu for s in segs])[idx]
    gpu = np.array([s.gpu for s in segs])[idx]
    superchip = cpu + gpu
    if sigma > 0:
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), int(round(cap)), int(run_index)]))
        superchip = np.maximum(superchip * (1.0 + sigma * rng.standard_normal(ts.size)), 0.0)
        cpu = np.maximum(cpu * (1.0 + sigma * rng.standard_normal(ts.size)), 0.0)
    run_id = f"{int(cap)}W-{run_index}"
    intervals = tuple(TaskInterval(s.task, s.start, s.end, run_id) for s in segs if s.task is not None)
    samples = {
        Component.SUPERCHIP: PowerStream(Component.SUPERCHIP, ts, superchip),
        Component.CPU: PowerStream(Component.CPU, ts, cpu),
    }
    return RunRecord(run_id, int(cap), samples, intervals, (0, segs[-1].end))


def oracle_profiles(workload: Sequence[TaskSpec], chip: ChipSpec, caps: Sequence[int]) -> ProfileMatrix:
    """Closed-form matrix (no sampling) for the same workload and caps."""
    cells = {}
    tasks = [t.name for t in workload]
    gap_total = sum(t.gap_ns * t.invocations for t in workload)
    gap_calls = sum(t.invocations for t in workload if t.gap_ns)
    if gap_calls:
        tasks.append(IDLE_TASK)
    for cap in caps:
        for task in workload:
            f = effective_frequency(cap, chip, task)
            runtime = model_runtime(task.base_runtime, task.compute_intensity, f) * task.invocations
            energy = model_power(f, chip, task) * runtime
            cells[(task.name, cap)] = TaskProfile.from_totals(task.name, cap, runtime, energy, task.invocations)
        if gap_calls:
            _, idle_gpu = idle_levels(cap, chip)
            runtime = gap_total / NS_PER_S
            cells[(IDLE_TASK, cap)] = TaskProfile.from_totals(IDLE_TASK, cap, runtime, idle_gpu * runtime, gap_calls)
    return ProfileMatrix(tuple(tasks), tuple(caps), cells)


# -- workload files and experiment output ----------------------------------

CHIP_KEYS = {
    "gpu_idle_power_w": "gpu_idle_power",
    "cpu_power_w": "cpu_power",
    "cpu_burst_power_w": "cpu_burst_power",
    "alpha": "alpha",
    "min_frequency_ratio": "min_frequency_ratio",
}
TASK_KEYS = {
    "name": "name",
    "base_runtime_s": "base_runtime",
    "compute_intensity": "compute_intensity",
    "peak_power_w": "peak_power",
    "invocations": "invocations",
    "gap_ns": "gap_ns",
}


def parse_workload(data: dict) -> tuple[list[TaskSpec], ChipSpec]:
    try:
        chip_raw = data["chip"]
        tasks_raw = data["tasks"]
    except KeyError as e:
        raise ValueError(f"workload spec is missing {e.args[0]!r}") from None
    unknown = set(chip_raw) - set(CHIP_KEYS)
    if unknown:
        raise ValueError(f"unknown chip keys {sorted(unknown)}")
    chip = ChipSpec(**{CHIP_KEYS[k]: float(v) for k, v in chip_raw.items()})
    tasks = []
    for raw in tasks_raw:
        unknown = set(raw) - set(TASK_KEYS)
        if unknown:
            raise ValueError(f"unknown task keys {sorted(unknown)}")
        kw = {TASK_KEYS[k]: v for k, v in raw.items()}
        for k in ("invocations", "gap_ns"):
            if k in kw:
                kw[k] = int(kw[k])
        task = TaskSpec(**kw)
        _check_task(chip, task)
        tasks.append(task)
    if not tasks:
        raise ValueError("workload spec has no tasks")
    if len({t.name for t in tasks}) != len(tasks):
        raise ValueError("workload task names must be unique")
    return tasks, chip


def load_workload(path) -> tuple[list[TaskSpec], ChipSpec]:
    return parse_workload(json.loads(Path(path).read_text(encoding="utf-8")))


def workload_to_dict(workload: Sequence[TaskSpec], chip: ChipSpec) -> dict:
    inv_chip = {v: k for k, v in CHIP_KEYS.items()}
    inv_task = {v: k for k, v in TASK_KEYS.items()}
    return {
        "chip": {inv_chip[k]: v for k, v in asdict(chip).items()},
        "tasks": [{inv_task[k]: v for k, v in asdict(t).items()} for t in workload],
    }


def check_caps(caps: Sequence[int], chip: ChipSpec):
    for cap in caps:
        if cap <= chip.cpu_power:
            raise InfeasibleCapError(cap, chip.cpu_power)


def simulate_experiment(workload: Sequence[TaskSpec], chip: ChipSpec, caps: Sequence[int],
                        runs: int, seed: int, out_dir, sample_period_ms: float = 5.0,
                        sigma: float = 0.0, edge_ns: int = 1) -> ExperimentManifest:
    """Write one power/interval CSV pair per (cap, run) plus ``manifest.json``."""
    caps = [int(c) for c in caps]
    check_caps(caps, chip)
    if runs < 1:
        raise ValueError("runs must be positive")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    keys = [(c, r) for c in caps for r in range(runs)]
    files = {k: RunFiles(f"power_{k[0]}W_run{k[1]}.csv", f"intervals_{k[0]}W_run{k[1]}.csv") for k in keys}

    def job(key):
        cap, r = key
        run = synthesize_run(workload, chip, cap, sample_period_ms, (seed, sigma), r, edge_ns)
        meta = {"cap_w": cap, "run": r}
        with atomic_open(out / files[key].power_file, "w", encoding="utf-8", newline="\n") as fh:
            write_power_trace(fh, run.samples, meta)
        with atomic_open(out / files[key].interval_file, "w", encoding="utf-8", newline="\n") as fh:
            write_interval_trace(fh, run.intervals, meta)

    workers = thread_count()
    if workers > 1 and len(keys) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(job, keys))
    else:
        for k in keys:
            job(k)
    manifest = ExperimentManifest(tuple(caps), runs, sample_period_ms, files)
    write_manifest(out / "manifest.json", manifest)
    return manifest


def energy_per_invocation(f: float, chip: ChipSpec, task: TaskSpec) -> float:
    return model_power(f, chip, task) * model_runtime(task.base_runtime, task.compute_intensity, f)


def frequency_for_power(power: float, chip: ChipSpec, task: TaskSpec) -> float:
    """Inverse of :func:`model_power` (no clamping)."""
    frac = (power - chip.gpu_idle_power) / (task.peak_power - chip.gpu_idle_power)
    return math.pow(frac, 1.0 / chip.alpha)
