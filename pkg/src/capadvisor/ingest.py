"""Trace parsing, GPU power derivation, energy integration and aggregation.

Trace files are CSV with optional leading ``# key=value`` metadata lines::

    # cap_w=300 run=1
    timestamp_ns,component,power_w
    0,superchip,612.5
    0,cpu,71.0

Timestamps are integer nanoseconds from run start, so every interval
width is exact; conversion to seconds happens only when totals are formed.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from ._util import atomic_open, thread_count
from .model import (
    DEFAULT_CAPS,
    IDLE_TASK,
    Component,
    PowerSample,
    ProfileMatrix,
    TaskInterval,
    TaskProfile,
)

POWER_HEADER = ["timestamp_ns", "component", "power_w"]
INTERVAL_HEADER = ["task", "start_ns", "end_ns"]
MATRIX_HEADER = ["task", "cap_w", "total_runtime_s", "total_energy_j", "call_count", "avg_power_w"]

NS_PER_S = 1_000_000_000


class TraceFormatError(ValueError):
    """Malformed trace, manifest or matrix file."""

    def __init__(self, message: str, line: int | None = None, source: str | None = None):
        self.line = line
        self.source = source
        where = ""
        if source:
            where += f"{source}: "
        super().__init__(where + (f"{message} at line {line}" if line else message))


@dataclass(frozen=True, eq=False)
class PowerStream:
    """Samples of one component, timestamps strictly increasing."""

    component: Component
    timestamps: np.ndarray  # int64 ns
    power: np.ndarray  # float64 W

    def __post_init__(self):
        ts = np.ascontiguousarray(self.timestamps, dtype=np.int64)
        pw = np.ascontiguousarray(self.power, dtype=np.float64)
        if ts.shape != pw.shape or ts.ndim != 1:
            raise ValueError("timestamps and power must be 1-D arrays of equal length")
        if ts.size > 1 and np.any(np.diff(ts) <= 0):
            raise ValueError(f"{self.component.value} timestamps are not strictly increasing")
        if np.any(pw < 0):
            raise ValueError(f"{self.component.value} stream has negative power")
        ts.flags.writeable = False
        pw.flags.writeable = False
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "power", pw)

    def __len__(self):
        return int(self.timestamps.size)

    def __eq__(self, other):
        if not isinstance(other, PowerStream):
            return NotImplemented
        return (self.component == other.component
                and np.array_equal(self.timestamps, other.timestamps)
                and np.array_equal(self.power, other.power))

    @classmethod
    def from_samples(cls, samples: Iterable[PowerSample]) -> "PowerStream":
        samples = list(samples)
        comps = {s.component for s in samples}
        if len(comps) != 1:
            raise ValueError("a stream holds exactly one component")
        return cls(comps.pop(), [s.timestamp for s in samples], [s.power for s in samples])

    def samples(self) -> list[PowerSample]:
        return [PowerSample(int(t), self.component, float(p))
                for t, p in zip(self.timestamps, self.power)]

    @property
    def duration_s(self) -> float:
        if self.timestamps.size == 0:
            return 0.0
        return int(self.timestamps[-1] - self.timestamps[0]) / NS_PER_S

    def period_ns(self) -> int:
        if self.timestamps.size < 2:
            return 0
        return int(np.median(np.diff(self.timestamps)))


# -- low-level CSV reading -------------------------------------------------

def _open_text(source) -> tuple[io.TextIOBase, str | None, bool]:
    if isinstance(source, (str, Path)):
        return open(source, "r", encoding="utf-8", newline=""), str(source), True
    if isinstance(source, (bytes, bytearray)):
        return io.StringIO(bytes(source).decode("utf-8"), newline=""), None, True
    if isinstance(source, io.TextIOBase):
        return source, getattr(source, "name", None), False
    # binary file-like
    return io.TextIOWrapper(source, encoding="utf-8", newline=""), getattr(source, "name", None), False


def _parse_meta(line: str, meta: dict[str, str]):
    for token in line.lstrip("#").split():
        if "=" in token:
            k, v = token.split("=", 1)
            meta[k.strip()] = v.strip()


def _read_table(source, header: list[str]):
    """Return (metadata, [(line_no, row)], source name).

    ``#`` lines are metadata only before the header; after it every
    non-blank line is data, so task names may start with ``#``.
    """
    fh, name, owned = _open_text(source)
    meta: dict[str, str] = {}
    rows: list[tuple[int, list[str]]] = []
    try:
        # LF only: str.splitlines would also break on U+2028 etc. inside task names
        lines = [ln[:-1] if ln.endswith("\r") else ln for ln in fh.read().split("\n")]
    finally:
        if owned:
            fh.close()
    lineno = 0
    header_seen = False
    for lineno, line in enumerate(lines, start=1):
        if not header_seen:
            if not line.strip():
                continue
            if line.startswith("#"):
                _parse_meta(line, meta)
                continue
            got = [c.strip() for c in next(csv.reader([line]))]
            if got != header:
                raise TraceFormatError(
                    f"expected header {','.join(header)!r}, got {line!r}", lineno, name)
            header_seen = True
            continue
        if not line.strip():
            continue
        rows.append((lineno, next(csv.reader([line]))))
    if not header_seen:
        raise TraceFormatError(f"missing header {','.join(header)!r}", None, name)
    return meta, rows, name


def _int_field(value: str, what: str, lineno: int, name) -> int:
    try:
        return int(value.strip())
    except ValueError:
        raise TraceFormatError(f"malformed {what} {value!r}", lineno, name) from None


def _float_field(value: str, what: str, lineno: int, name) -> float:
    try:
        x = float(value.strip())
    except ValueError:
        raise TraceFormatError(f"malformed {what} {value!r}", lineno, name) from None
    if not math.isfinite(x):
        raise TraceFormatError(f"non-finite {what} {value!r}", lineno, name)
    return x


# -- power traces ----------------------------------------------------------

def read_power_trace(source) -> tuple[dict[Component, PowerStream], dict[str, str]]:
    """Like :func:`parse_power_trace` but also returns the ``#`` metadata."""
    meta, rows, name = _read_table(source, POWER_HEADER)
    cols: dict[Component, tuple[list[int], list[float]]] = {}
    for lineno, row in rows:
        if len(row) != 3:
            raise TraceFormatError(f"expected 3 fields, got {len(row)}", lineno, name)
        ts = _int_field(row[0], "timestamp", lineno, name)
        label = row[1].strip().lower()
        try:
            comp = Component(label)
        except ValueError:
            raise TraceFormatError(f"unknown component {row[1]!r}", lineno, name) from None
        power = _float_field(row[2], "power", lineno, name)
        if power < 0:
            raise TraceFormatError("negative power", lineno, name)
        t_list, p_list = cols.setdefault(comp, ([], []))
        if t_list and ts <= t_list[-1]:
            raise TraceFormatError(
                f"non-monotone {comp.value} timestamp {ts} (previous {t_list[-1]})", lineno, name)
        t_list.append(ts)
        p_list.append(power)
    streams = {c: PowerStream(c, t, p) for c, (t, p) in cols.items()}
    return streams, meta


def parse_power_trace(source) -> dict[Component, PowerStream]:
    """Parse a ``timestamp_ns,component,power_w`` CSV into per-component streams.

    ``source`` may be a path, raw bytes, or an open text/binary file.
    """
    return read_power_trace(source)[0]


def write_power_trace(fh, streams: Mapping[Component, PowerStream], meta: Mapping | None = None):
    """Write streams interleaved by timestamp (superchip before cpu before gpu)."""
    if meta:
        fh.write("# " + " ".join(f"{k}={v}" for k, v in meta.items()) + "\n")
    fh.write(",".join(POWER_HEADER) + "\n")
    order = [c for c in Component if c in streams]
    rows = []
    for rank, comp in enumerate(order):
        s = streams[comp]
        rows.extend((int(t), rank, comp.value, float(p)) for t, p in zip(s.timestamps, s.power))
    rows.sort(key=lambda r: (r[0], r[1]))
    fh.writelines(f"{t},{label},{p!r}\n" for t, _, label, p in rows)


# -- interval traces -------------------------------------------------------

def read_interval_trace(source, run_id: str = "") -> tuple[list[TaskInterval], dict[str, str]]:
    meta, rows, name = _read_table(source, INTERVAL_HEADER)
    out = []
    for lineno, row in rows:
        if len(row) != 3:
            raise TraceFormatError(f"expected 3 fields, got {len(row)}", lineno, name)
        start = _int_field(row[1], "start_ns", lineno, name)
        end = _int_field(row[2], "end_ns", lineno, name)
        if start >= end:
            raise TraceFormatError(f"interval start {start} >= end {end}", lineno, name)
        # task names are compared verbatim; no stripping
        out.append(TaskInterval(row[0], start, end, run_id))
    return out, meta


def parse_interval_trace(source, run_id: str = "") -> list[TaskInterval]:
    """Parse a ``task,start_ns,end_ns`` CSV."""
    return read_interval_trace(source, run_id)[0]


def write_interval_trace(fh, intervals: Iterable[TaskInterval], meta: Mapping | None = None):
    if meta:
        fh.write("# " + " ".join(f"{k}={v}" for k, v in meta.items()) + "\n")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(INTERVAL_HEADER)
    for iv in intervals:
        w.writerow([iv.task, iv.start, iv.end])


# -- derivations -----------------------------------------------------------

def derive_gpu_power(superchip: PowerStream, cpu: PowerStream) -> PowerStream:
    """GPU power as superchip minus linearly interpolated CPU power.

    One output sample per superchip sample inside the CPU stream's time
    range. Negative differences (sensor jitter) clamp to 0.
    """
    if len(superchip) == 0 or len(cpu) == 0:
        raise ValueError("derive_gpu_power needs non-empty superchip and cpu streams")
    lo, hi = cpu.timestamps[0], cpu.timestamps[-1]
    mask = (superchip.timestamps >= lo) & (superchip.timestamps <= hi)
    if not mask.any():
        raise ValueError(
            f"superchip [{superchip.timestamps[0]}, {superchip.timestamps[-1]}] ns and "
            f"cpu [{lo}, {hi}] ns time ranges are disjoint")
    ts = superchip.timestamps[mask]
    cpu_at = np.interp(ts, cpu.timestamps, cpu.power)
    gpu = np.maximum(superchip.power[mask] - cpu_at, 0.0)
    return PowerStream(Component.GPU, ts, gpu)


def _check_no_overlap(intervals: Sequence[TaskInterval]):
    for prev, cur in zip(intervals, intervals[1:]):
        if cur.start < prev.end:
            raise ValueError(
                f"overlapping GPU intervals: {prev.task!r} [{prev.start}, {prev.end}) and "
                f"{cur.task!r} [{cur.start}, {cur.end})")


def derive_idle_intervals(intervals: Iterable[TaskInterval], span: tuple[int, int],
                          min_gap_ns: int = 0, run_id: str | None = None) -> list[TaskInterval]:
    """Maximal gaps of ``span`` not covered by any GPU task interval.

    Gaps shorter than ``min_gap_ns`` are dropped; the default keeps all.
    """
    lo, hi = span
    ordered = sorted(intervals, key=lambda iv: (iv.start, iv.end))
    _check_no_overlap(ordered)
    if ordered and (ordered[0].start < lo or ordered[-1].end > hi):
        raise ValueError(f"GPU intervals extend outside span {span}")
    if run_id is None:
        run_id = ordered[0].run_id if ordered else ""
    idle = []
    cursor = lo
    for iv in ordered:
        if iv.start > cursor and iv.start - cursor >= min_gap_ns:
            idle.append(TaskInterval(IDLE_TASK, cursor, iv.start, run_id))
        cursor = max(cursor, iv.end)
    if hi > cursor and hi - cursor >= min_gap_ns:
        idle.append(TaskInterval(IDLE_TASK, cursor, hi, run_id))
    return idle


def integrate_energy(stream: PowerStream, interval: TaskInterval,
                     sample_period_ns: int | None = None) -> float:
    """Trapezoidal energy (J) of ``stream`` over ``interval``.

    Power at the interval ends is linearly interpolated between bracketing
    samples. The interval may overhang the sampled range by at most one
    sample period; the overhang is held at the nearest sample's value.
    """
    ts, pw = stream.timestamps, stream.power
    if ts.size == 0:
        raise ValueError(f"no samples bracket interval {interval.task!r}")
    period = stream.period_ns() if sample_period_ns is None else int(sample_period_ns)
    a, b = interval.start, interval.end
    if a < ts[0] - period or b > ts[-1] + period:
        raise ValueError(
            f"no samples bracket interval {interval.task!r} [{a}, {b}] ns "
            f"(samples cover [{ts[0]}, {ts[-1]}] ns)")
    i = np.searchsorted(ts, a, side="right")
    j = np.searchsorted(ts, b, side="left")
    xs = np.empty(j - i + 2, dtype=np.int64)
    ys = np.empty(j - i + 2, dtype=np.float64)
    xs[0], xs[-1] = a, b
    xs[1:-1] = ts[i:j]
    ys[0], ys[-1] = np.interp((a, b), ts, pw)
    ys[1:-1] = pw[i:j]
    widths = np.diff(xs).astype(np.float64) / NS_PER_S
    return float(np.sum(widths * (ys[1:] + ys[:-1])) * 0.5)


# -- runs ------------------------------------------------------------------

@dataclass(frozen=True)
class TaskAggregate:
    total_runtime: float  # s
    total_energy: float  # J
    call_count: int


@dataclass(frozen=True)
class RunRecord:
    run_id: str
    cap: int
    samples: Mapping[Component, PowerStream]
    intervals: tuple[TaskInterval, ...]
    span: tuple[int, int] = None  # type: ignore[assignment]

    def __post_init__(self):
        object.__setattr__(self, "intervals", tuple(self.intervals))
        if self.span is None:
            object.__setattr__(self, "span", _natural_span(self.samples, self.intervals))
        lo, hi = self.span
        for iv in self.intervals:
            if iv.start < lo or iv.end > hi:
                raise ValueError(f"interval {iv.task!r} [{iv.start}, {iv.end}] outside span {self.span}")

    def gpu_stream(self) -> PowerStream:
        """Derived GPU power when superchip and CPU are present, else the raw GPU stream."""
        s = self.samples
        if Component.SUPERCHIP in s and Component.CPU in s:
            return derive_gpu_power(s[Component.SUPERCHIP], s[Component.CPU])
        if Component.GPU in s:
            return s[Component.GPU]
        raise ValueError(f"run {self.run_id}: need superchip+cpu or gpu samples")

    def with_idle(self, min_gap_ns: int = 0) -> "RunRecord":
        gpu_ivs = [iv for iv in self.intervals if iv.task != IDLE_TASK]
        idle = derive_idle_intervals(gpu_ivs, self.span, min_gap_ns, self.run_id)
        return RunRecord(self.run_id, self.cap, self.samples, tuple(gpu_ivs) + tuple(idle), self.span)


def _natural_span(samples: Mapping[Component, PowerStream], intervals) -> tuple[int, int]:
    firsts, lasts = [], []
    for s in samples.values():
        if len(s):
            firsts.append(int(s.timestamps[0]))
            lasts.append(int(s.timestamps[-1]))
    for iv in intervals:
        firsts.append(iv.start)
        lasts.append(iv.end)
    if not firsts:
        raise ValueError("run has neither samples nor intervals")
    return min(firsts), max(lasts)


def aggregate_run(run: RunRecord, gpu: PowerStream,
                  sample_period_ns: int | None = None) -> dict[str, TaskAggregate]:
    """Per-task runtime, energy and call count for one run."""
    runtime_ns: dict[str, int] = {}
    energy: dict[str, float] = {}
    calls: dict[str, int] = {}
    for iv in run.intervals:
        runtime_ns[iv.task] = runtime_ns.get(iv.task, 0) + iv.duration
        energy[iv.task] = energy.get(iv.task, 0.0) + integrate_energy(gpu, iv, sample_period_ns)
        calls[iv.task] = calls.get(iv.task, 0) + 1
    return {t: TaskAggregate(runtime_ns[t] / NS_PER_S, energy[t], calls[t]) for t in runtime_ns}


def cpu_energy_by_task(run: RunRecord, min_gap_ns: int = 0,
                       sample_period_ns: int | None = None) -> dict[str, float]:
    """CPU energy (J) drawn while each task ran.

    GPU tasks are charged derived GPU power only; this is the CPU share
    over the same intervals, kept apart for reporting.
    """
    if Component.CPU not in run.samples:
        raise ValueError(f"run {run.run_id}: no cpu samples")
    cpu = run.samples[Component.CPU]
    out: dict[str, float] = {}
    for iv in run.with_idle(min_gap_ns).intervals:
        out[iv.task] = out.get(iv.task, 0.0) + integrate_energy(cpu, iv, sample_period_ns)
    return out


def process_run(run: RunRecord, min_gap_ns: int = 0,
                sample_period_ns: int | None = None) -> dict[str, TaskAggregate]:
    """Derive GPU power and idle phases, then aggregate."""
    return aggregate_run(run.with_idle(min_gap_ns), run.gpu_stream(), sample_period_ns)


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def average_runs(aggregates: Sequence[Mapping[str, TaskAggregate]], cap: int) -> dict[str, TaskProfile]:
    """Mean of per-run totals; a task missing from a run counts as zero there.

    avg_power is mean energy over mean runtime, not the mean of per-run powers.
    """
    if not aggregates:
        raise ValueError("average_runs needs at least one run")
    n = len(aggregates)
    tasks: dict[str, None] = {}
    for agg in aggregates:
        for t in agg:
            tasks.setdefault(t)
    zero = TaskAggregate(0.0, 0.0, 0)
    out = {}
    for t in tasks:
        rows = [agg.get(t, zero) for agg in aggregates]
        runtime = math.fsum(r.total_runtime for r in rows) / n
        energy = math.fsum(r.total_energy for r in rows) / n
        calls = _round_half_up(sum(r.call_count for r in rows) / n)
        out[t] = TaskProfile.from_totals(t, cap, runtime, energy, calls)
    return out


# -- experiment manifest ---------------------------------------------------

@dataclass(frozen=True)
class RunFiles:
    power_file: str
    interval_file: str


@dataclass(frozen=True)
class ExperimentManifest:
    caps: tuple[int, ...] = DEFAULT_CAPS
    runs_per_cap: int = 3
    sample_period_ms: float = 5.0
    files: Mapping[tuple[int, int], RunFiles] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "caps", tuple(int(c) for c in self.caps))
        if not self.caps or any(c <= 0 for c in self.caps):
            raise ValueError("manifest caps must be positive watts")
        if len(set(self.caps)) != len(self.caps):
            raise ValueError("manifest lists a cap twice")
        if self.runs_per_cap < 1:
            raise ValueError("runs_per_cap must be positive")
        if self.sample_period_ms <= 0:
            raise ValueError("sample_period_ms must be positive")
        expected = {(c, r) for c in self.caps for r in range(self.runs_per_cap)}
        got = set(self.files)
        if got != expected:
            missing = sorted(expected - got)
            extra = sorted(got - expected)
            raise ValueError(f"manifest run table mismatch: missing {missing}, unexpected {extra}")

    @property
    def sample_period_ns(self) -> int:
        return int(round(self.sample_period_ms * 1_000_000))

    def to_dict(self) -> dict:
        return {
            "caps": list(self.caps),
            "runs_per_cap": self.runs_per_cap,
            "sample_period_ms": self.sample_period_ms,
            "runs": [
                {"cap_w": c, "run_index": r,
                 "power_file": self.files[(c, r)].power_file,
                 "interval_file": self.files[(c, r)].interval_file}
                for c in self.caps for r in range(self.runs_per_cap)
            ],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "ExperimentManifest":
        try:
            files: dict[tuple[int, int], RunFiles] = {}
            for entry in data["runs"]:
                key = (int(entry["cap_w"]), int(entry["run_index"]))
                if key in files:
                    raise ValueError(f"run ({key[0]} W, #{key[1]}) referenced twice")
                files[key] = RunFiles(str(entry["power_file"]), str(entry["interval_file"]))
            return cls(
                caps=tuple(int(c) for c in data["caps"]),
                runs_per_cap=int(data["runs_per_cap"]),
                sample_period_ms=float(data.get("sample_period_ms", 5.0)),
                files=files,
            )
        except KeyError as e:
            raise ValueError(f"manifest is missing key {e.args[0]!r}") from None


def load_manifest(path) -> ExperimentManifest:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise TraceFormatError(f"manifest is not valid JSON: {e.msg}", e.lineno, str(path)) from None
    try:
        return ExperimentManifest.from_dict(data)
    except (ValueError, TypeError) as e:
        raise TraceFormatError(str(e), None, str(path)) from None


def write_manifest(path, manifest: ExperimentManifest):
    with atomic_open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest.to_dict(), fh, indent=2)
        fh.write("\n")


def load_run(base_dir, manifest: ExperimentManifest, cap: int, run_index: int) -> RunRecord:
    """Read one (cap, run) pair, checking any ``cap_w`` metadata against the manifest."""
    files = manifest.files[(cap, run_index)]
    power_path = Path(base_dir) / files.power_file
    interval_path = Path(base_dir) / files.interval_file
    for p in (power_path, interval_path):
        if not p.is_file():
            raise FileNotFoundError(f"missing run file {p}")
    run_id = f"{cap}W-{run_index}"
    streams, pmeta = read_power_trace(power_path)
    intervals, imeta = read_interval_trace(interval_path, run_id)
    for meta, p in ((pmeta, power_path), (imeta, interval_path)):
        if "cap_w" in meta and int(float(meta["cap_w"])) != cap:
            raise TraceFormatError(
                f"trace header cap_w={meta['cap_w']} does not match manifest cap {cap} W",
                None, str(p))
    return RunRecord(run_id, cap, streams, intervals)


def build_matrix(manifest: ExperimentManifest, runs: Mapping[tuple[int, int], RunRecord],
                 min_gap_ns: int = 0, threads: int | None = None) -> ProfileMatrix:
    """Aggregate every run, average per cap and join into a matrix.

    Tasks are the union over all caps; a task absent at a cap gets a
    zero-filled cell that :func:`validate_matrix` flags.
    """
    keys = [(c, r) for c in manifest.caps for r in range(manifest.runs_per_cap)]
    missing = [k for k in keys if k not in runs]
    if missing:
        raise ValueError(f"missing runs for {missing}")
    for (cap, r) in keys:
        if runs[(cap, r)].cap != cap:
            raise ValueError(f"run ({cap} W, #{r}) is recorded at {runs[(cap, r)].cap} W")
    period = manifest.sample_period_ns
    workers = thread_count() if threads is None else max(1, threads)

    def job(key):
        return process_run(runs[key], min_gap_ns, period)

    if workers > 1 and len(keys) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            aggs = dict(zip(keys, pool.map(job, keys)))
    else:
        aggs = {k: job(k) for k in keys}

    per_cap = {cap: average_runs([aggs[(cap, r)] for r in range(manifest.runs_per_cap)], cap)
               for cap in manifest.caps}
    tasks: dict[str, None] = {}
    for cap in sorted(manifest.caps):
        for t in per_cap[cap]:
            tasks.setdefault(t)
    cells = {}
    for cap, profiles in per_cap.items():
        for t in tasks:
            cells[(t, cap)] = profiles.get(t) or TaskProfile(t, cap, 0.0, 0.0, 0, 0.0)
    return ProfileMatrix(tuple(tasks), manifest.caps, cells, max(manifest.caps))


def ingest_manifest(path, min_gap_ns: int = 0, threads: int | None = None) -> ProfileMatrix:
    path = Path(path)
    manifest = load_manifest(path)
    runs = {(c, r): load_run(path.parent, manifest, c, r)
            for c in manifest.caps for r in range(manifest.runs_per_cap)}
    return build_matrix(manifest, runs, min_gap_ns, threads)


# -- matrix CSV ------------------------------------------------------------

def write_matrix_csv(fh, matrix: ProfileMatrix):
    if matrix.baseline_cap != max(matrix.caps):
        fh.write(f"# baseline_cap_w={matrix.baseline_cap}\n")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(MATRIX_HEADER)
    for task in matrix.tasks:
        for cap in matrix.caps:
            p = matrix.cells.get((task, cap))
            if p is None:
                continue
            w.writerow([p.task, p.cap, repr(float(p.total_runtime)), repr(float(p.total_energy)),
                        p.call_count, repr(float(p.avg_power))])


def save_matrix(path, matrix: ProfileMatrix):
    with atomic_open(path, "w", encoding="utf-8", newline="") as fh:
        write_matrix_csv(fh, matrix)


def read_matrix_csv(source) -> ProfileMatrix:
    """Import a matrix CSV; missing cells are allowed and left to validation."""
    meta, rows, name = _read_table(source, MATRIX_HEADER)
    profiles = []
    seen = set()
    for lineno, row in rows:
        if len(row) != 6:
            raise TraceFormatError(f"expected 6 fields, got {len(row)}", lineno, name)
        task = row[0]
        cap = _int_field(row[1], "cap_w", lineno, name)
        if (task, cap) in seen:
            raise TraceFormatError(f"duplicate cell ({task!r}, {cap} W)", lineno, name)
        seen.add((task, cap))
        count = _int_field(row[4], "call_count", lineno, name)
        profiles.append(TaskProfile(
            task, cap,
            _float_field(row[2], "total_runtime_s", lineno, name),
            _float_field(row[3], "total_energy_j", lineno, name),
            count,
            _float_field(row[5], "avg_power_w", lineno, name),
        ))
    if not profiles:
        raise TraceFormatError("matrix file has no rows", None, name)
    baseline = int(meta["baseline_cap_w"]) if "baseline_cap_w" in meta else None
    return ProfileMatrix.from_profiles(profiles, baseline)


def load_matrix(path) -> ProfileMatrix:
    return read_matrix_csv(Path(path))
