"""Report figures, rendered off-screen to PNG."""

from __future__ import annotations

from pathlib import Path
from typing import Mapping

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .historian import Dataset  # noqa: E402

# no Software/date chunks, so reruns are byte-identical
_PNG_METADATA = {"Software": None}


def _save(fig, path: Path) -> Path:
    fig.savefig(path, format="png", dpi=100, metadata=_PNG_METADATA)
    plt.close(fig)
    return path


def antecedent_histogram_figure(hist: Mapping[int, int], path: Path, title: str = "") -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    sizes = sorted(hist)
    ax.bar([str(s) for s in sizes], [hist[s] for s in sizes], color="#4472c4")
    ax.set_xlabel("Antecedent size")
    ax.set_ylabel("Number of rules")
    if title:
        ax.set_title(title)
    for x, s in enumerate(sizes):
        ax.annotate(str(hist[s]), (x, hist[s]), ha="center", va="bottom", fontsize=8)
    fig.tight_layout()
    return _save(fig, path)


def level_trace_figure(
    trace: Dataset,
    sensor: str,
    path: Path,
    *,
    window: tuple[int, int] | None = None,
    high: float | None = None,
    high_high: float | None = None,
) -> Path:
    """Level against time, split into before / during / after an attack window."""
    ts = trace.timestamps
    level = trace.column(sensor)
    fig, ax = plt.subplots(figsize=(8, 4))
    if window is None:
        ax.plot(ts, level, color="#4472c4", lw=1, label=sensor)
    else:
        start, end = window
        phases = (
            (ts <= start, "#4472c4", "before attack"),
            ((ts >= start) & (ts <= end), "#c00000", "during attack"),
            (ts >= end, "#ed7d31", "after attack"),
        )
        for mask, colour, label in phases:
            if mask.any():
                ax.plot(ts[mask], level[mask], color=colour, lw=1.2, label=label)
        ax.axvspan(start, end, color="#c00000", alpha=0.08)
    if high is not None:
        ax.axhline(high, color="grey", ls="--", lw=0.8, label=f"High {high:g} mm")
    if high_high is not None:
        ax.axhline(high_high, color="black", ls=":", lw=0.8, label=f"HighHigh {high_high:g} mm")
    ax.set_xlabel("Time (s)")
    ax.set_ylabel(f"{sensor} (mm)")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    return _save(fig, path)


def comparison_figure(normal: Dataset, attacked: Dataset, signals: list[str], path: Path) -> Path:
    """Stacked panels of each signal, normal against attacked, on a shared time axis."""
    fig, axes = plt.subplots(len(signals), 1, figsize=(8, 2.2 * len(signals)), sharex=True, squeeze=False)
    for ax, name in zip(axes[:, 0], signals):
        ax.plot(normal.timestamps, normal.column(name), color="#4472c4", lw=1, label="normal")
        ax.plot(attacked.timestamps, attacked.column(name), color="#c00000", lw=1, label="attacked")
        ax.set_ylabel(name)
    axes[0, 0].legend(loc="best", fontsize=8)
    axes[-1, 0].set_xlabel("Time (s)")
    fig.tight_layout()
    return _save(fig, path)


def percentage_bar_figure(labels: list[str], values: list[float], path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(labels, np.asarray(values, dtype=float), color="#70ad47")
    ax.set_ylabel("False attack (%)")
    fig.tight_layout()
    return _save(fig, path)
