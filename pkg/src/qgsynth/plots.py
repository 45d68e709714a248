"""Matplotlib rendering of quality histograms and mixing-sweep curves.

Figures are written next to their delimited data files; the CSV/JSON outputs
remain the primary contract and every figure is reproducible from them.
"""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .quality import Histogram

_SERIES_COLORS = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b")


def render_histograms(
    histograms: Sequence[Histogram],
    path: str | Path,
    title: str = "",
    xlabel: str = "",
) -> Path:
    """Overlayed step histograms, one series per label."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(6, 4))
    for i, hist in enumerate(histograms):
        edges = list(hist.bin_edges)
        counts = list(hist.counts)
        ax.stairs(counts, edges, label=hist.label, fill=True, alpha=0.4,
                  color=_SERIES_COLORS[i % len(_SERIES_COLORS)])
    ax.set_xlabel(xlabel)
    ax.set_ylabel("count")
    if title:
        ax.set_title(title)
    if len(histograms) > 1 or any(h.label for h in histograms):
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_curves(
    rows: Sequence[Mapping],
    path: str | Path,
    title: str = "",
) -> Path:
    """Metric-vs-fraction lines from long-format curve rows
    ({fraction, metric, value}), one line per metric."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    by_metric: dict[str, list[tuple[float, float]]] = {}
    for row in rows:
        by_metric.setdefault(row["metric"], []).append((row["fraction"], row["value"]))
    fig, ax = plt.subplots(figsize=(6, 4))
    for i, (metric, points) in enumerate(sorted(by_metric.items())):
        points = sorted(points)
        ax.plot(
            [p[0] for p in points],
            [p[1] for p in points],
            marker="o",
            label=metric,
            color=_SERIES_COLORS[i % len(_SERIES_COLORS)],
        )
    ax.set_xlabel("synthetic fraction")
    ax.set_ylabel("score")
    ax.set_ylim(0, 1)
    if title:
        ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
