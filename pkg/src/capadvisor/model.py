"""Domain types shared across the toolkit.

Everything here is immutable after construction. Consistency checks that
may legitimately fail on third-party data (e.g. a stored average power that
does not match energy/runtime) live in :func:`validate_matrix` instead of
the constructors.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Mapping

IDLE_TASK = "gpu compute idle"

DEFAULT_CAPS = tuple(range(200, 1001, 100))

# Relative tolerance for avg_power vs total_energy / total_runtime.
AVG_POWER_RTOL = 0.005

SQRT2 = math.sqrt(2.0)


class Component(str, enum.Enum):
    SUPERCHIP = "superchip"
    CPU = "cpu"
    GPU = "gpu"


@dataclass(frozen=True)
class PowerSample:
    timestamp: int  # ns from run start
    component: Component
    power: float  # W

    def __post_init__(self):
        if self.power < 0:
            raise ValueError(f"negative power {self.power!r}")


@dataclass(frozen=True)
class TaskInterval:
    task: str
    start: int  # ns
    end: int  # ns
    run_id: str = ""

    def __post_init__(self):
        if not self.start < self.end:
            raise ValueError(
                f"interval for {self.task!r} has start {self.start} >= end {self.end}")

    @property
    def duration(self) -> int:
        return self.end - self.start


@dataclass(frozen=True)
class TaskProfile:
    """Aggregated runtime/energy of one task at one power cap."""

    task: str
    cap: int
    total_runtime: float  # s
    total_energy: float  # J
    call_count: int
    avg_power: float  # W

    @classmethod
    def from_totals(cls, task: str, cap: int, runtime: float, energy: float,
                    call_count: int) -> "TaskProfile":
        avg = energy / runtime if runtime > 0 else 0.0
        return cls(task, cap, runtime, energy, call_count, avg)


@dataclass(frozen=True)
class ProfileMatrix:
    """Task x cap grid of profiles.

    ``caps`` is kept sorted ascending. ``cells`` may be incomplete; the
    gap is reported by :func:`validate_matrix`.
    """

    tasks: tuple[str, ...]
    caps: tuple[int, ...]
    cells: Mapping[tuple[str, int], TaskProfile]
    baseline_cap: int = None  # type: ignore[assignment]

    def __post_init__(self):
        tasks = tuple(self.tasks)
        caps = tuple(sorted(int(c) for c in self.caps))
        if len(set(caps)) != len(caps):
            raise ValueError(f"duplicate caps in {caps}")
        if len(set(tasks)) != len(tasks):
            raise ValueError("duplicate task names")
        if not caps:
            raise ValueError("matrix needs at least one cap")
        object.__setattr__(self, "tasks", tasks)
        object.__setattr__(self, "caps", caps)
        object.__setattr__(self, "cells", MappingProxyType(dict(self.cells)))
        if self.baseline_cap is None:
            object.__setattr__(self, "baseline_cap", caps[-1])

    def __eq__(self, other):
        if not isinstance(other, ProfileMatrix):
            return NotImplemented
        return (self.tasks == other.tasks and self.caps == other.caps
                and dict(self.cells) == dict(other.cells)
                and self.baseline_cap == other.baseline_cap)

    def __hash__(self):
        return hash((self.tasks, self.caps, self.baseline_cap))

    def cell(self, task: str, cap: int) -> TaskProfile:
        return self.cells[(task, cap)]

    def baseline(self, task: str) -> TaskProfile:
        return self.cells[(task, self.baseline_cap)]

    def with_baseline(self, cap: int) -> "ProfileMatrix":
        if cap not in self.caps:
            raise ValueError(f"baseline cap {cap} W is not one of {list(self.caps)}")
        return ProfileMatrix(self.tasks, self.caps, self.cells, cap)

    @classmethod
    def from_profiles(cls, profiles: Iterable[TaskProfile],
                      baseline_cap: int | None = None) -> "ProfileMatrix":
        cells: dict[tuple[str, int], TaskProfile] = {}
        tasks: dict[str, None] = {}
        caps: set[int] = set()
        for p in profiles:
            key = (p.task, p.cap)
            if key in cells:
                raise ValueError(f"duplicate cell ({p.task!r}, {p.cap} W)")
            cells[key] = p
            tasks.setdefault(p.task)
            caps.add(p.cap)
        return cls(tuple(tasks), tuple(caps), cells, baseline_cap)


@dataclass(frozen=True)
class MetricPoint:
    task: str
    cap: int
    sed: float
    n_energy: float
    n_runtime: float
    distance: float


@dataclass(frozen=True)
class Recommendation:
    """Per-task chosen caps; percents are signed changes vs the baseline."""

    task: str
    sed_cap: int
    ed_cap: int
    sed_energy_pct: float
    sed_runtime_pct: float
    ed_energy_pct: float
    ed_runtime_pct: float


@dataclass(frozen=True)
class Violation:
    kind: str
    message: str
    task: str | None = None
    cap: int | None = None

    def __str__(self):
        return f"{self.kind}: {self.message}"


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __len__(self):
        return len(self.violations)

    def __iter__(self):
        return iter(self.violations)

    def add(self, kind: str, message: str, task=None, cap=None):
        self.violations.append(Violation(kind, message, task, cap))

    def kinds(self) -> list[str]:
        return [v.kind for v in self.violations]

    def summary(self) -> str:
        if not self.violations:
            return "validation: OK"
        lines = [f"validation: {len(self.violations)} violation(s)"]
        lines += [f"  - {v}" for v in self.violations]
        return "\n".join(lines)


def avg_power_consistent(p: TaskProfile, rtol: float = AVG_POWER_RTOL) -> bool:
    if p.total_runtime <= 0:
        return True
    derived = p.total_energy / p.total_runtime
    if p.avg_power == 0:
        return derived == 0
    return abs(p.avg_power - derived) / abs(p.avg_power) <= rtol


def validate_matrix(matrix: ProfileMatrix) -> ValidationReport:
    """Check every type invariant; violations are returned, never raised."""
    report = ValidationReport()
    if matrix.baseline_cap not in matrix.caps:
        report.add("baseline not in caps",
                   f"baseline cap {matrix.baseline_cap} W is not one of {list(matrix.caps)}")
    for cap in matrix.caps:
        if cap <= 0:
            report.add("non-positive cap", f"cap {cap} W must be positive", cap=cap)
    known = set(matrix.tasks)
    caps = set(matrix.caps)
    for (task, cap), p in matrix.cells.items():
        if task not in known or cap not in caps:
            report.add("stray cell", f"cell ({task!r}, {cap} W) is outside the grid", task, cap)
        if (p.task, p.cap) != (task, cap):
            report.add("mislabeled cell",
                       f"cell at ({task!r}, {cap} W) holds ({p.task!r}, {p.cap} W)", task, cap)
    for task in matrix.tasks:
        for cap in matrix.caps:
            p = matrix.cells.get((task, cap))
            if p is None:
                report.add("missing cell", f"no profile for ({task!r}, {cap} W)", task, cap)
                continue
            _check_cell(report, p)
    return report


def _check_cell(report: ValidationReport, p: TaskProfile):
    where = f"({p.task!r}, {p.cap} W)"
    values = (p.total_runtime, p.total_energy, p.avg_power)
    if not all(math.isfinite(v) for v in values):
        report.add("non-finite value", f"{where} has a non-finite field", p.task, p.cap)
        return
    if p.total_runtime < 0 or p.total_energy < 0 or p.avg_power < 0 or p.call_count < 0:
        report.add("negative value", f"{where} has a negative field", p.task, p.cap)
    if p.call_count == 0 and p.total_runtime == 0:
        report.add("empty cell", f"task absent at {where}; zero-filled", p.task, p.cap)
    if not avg_power_consistent(p):
        derived = p.total_energy / p.total_runtime
        report.add("avg power inconsistent",
                   f"{where} stores {p.avg_power:.2f} W but energy/runtime is {derived:.1f} W",
                   p.task, p.cap)
