"""Matplotlib renderings of the per-task metric curves.

Figures go next to the CSV outputs. PNG metadata is stripped so that
identical inputs give identical files.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from ._util import atomic_open  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 10,
    "axes.titlesize": 10,
    "legend.fontsize": 7,
    "lines.linewidth": 1.5,
    "lines.markersize": 4,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "svg.hashsalt": "capadvisor",
}

MARKERS = "osD^v<>ph*"


def _plot_metric(bundle, attr: str, ylabel: str, title: str, path: Path) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(7.0, 4.2))
        for i, (task, series) in enumerate(bundle.series.items()):
            caps = [p.cap for p in series.points]
            ys = [getattr(p, attr) for p in series.points]
            ax.plot(caps, ys, marker=MARKERS[i % len(MARKERS)], label=task)
        ax.set_xlabel("Power cap (W)")
        ax.set_ylabel(ylabel)
        ax.set_title(title)
        ax.set_xticks(list(bundle.matrix.caps))
        ax.legend(loc="best", ncol=2)
        fig.tight_layout()
        with atomic_open(path, "wb") as fh:
            fig.savefig(fh, format="png", dpi=120, metadata={"Software": None})
        plt.close(fig)
    return path


def render_figures(bundle, out_dir, metric: str = "both") -> list[Path]:
    out = Path(out_dir)
    written = []
    if metric in ("both", "sed"):
        written.append(_plot_metric(bundle, "sed", "Speedup-energy-delay",
                                    "Speedup-energy-delay per task (higher is better)",
                                    out / "sed.png"))
    if metric in ("both", "ed"):
        written.append(_plot_metric(bundle, "distance", "Normalized energy/runtime distance",
                                    "Euclidean distance per task (lower is better)",
                                    out / "distance.png"))
    return written
