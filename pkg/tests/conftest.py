import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from capadvisor.sim import ChipSpec, TaskSpec  # noqa: E402

_ACCEPTANCE = []


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(label): exit criterion, summarized at the end of the run")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    for name, label in report.user_properties:
        if name == "acceptance":
            _ACCEPTANCE.append((label, report.outcome, report.duration))


@pytest.fixture(autouse=True)
def _tag_acceptance(request):
    marker = request.node.get_closest_marker("acceptance")
    if marker:
        request.node.user_properties.append(("acceptance", marker.args[0]))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label, outcome, duration in _ACCEPTANCE:
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"[{status}] {label} ({duration:.2f} s)")


@pytest.fixture
def chip():
    return ChipSpec(gpu_idle_power=110.0, cpu_power=70.0, cpu_burst_power=150.0,
                    alpha=2.5, min_frequency_ratio=0.1)


@pytest.fixture
def four_task_workload():
    """Memory-bound to fully compute-bound, with idle gaps between most calls."""
    return [
        TaskSpec("mem_bound", 0.04, 0.05, 420.0, 20, 2_000_000),
        TaskSpec("mixed", 0.03, 0.5, 560.0, 20, 1_000_000),
        TaskSpec("compute_heavy", 0.05, 0.9, 700.0, 20, 0),
        TaskSpec("compute_full", 0.05, 1.0, 800.0, 20, 3_000_000),
    ]
