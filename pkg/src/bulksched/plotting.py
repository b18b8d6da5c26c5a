"""Matplotlib figures written next to the JSON reports."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .simulate import TaskSchedule  # noqa: E402


def gantt(ts: TaskSchedule, path: str | Path, title: str | None = None) -> Path:
    """One row per core, one bar per task, coloured by operator."""
    path = Path(path)
    ops = sorted({t.op for t in ts.tasks})
    cmap = plt.get_cmap("tab20")
    colour = {op: cmap(i % 20) for i, op in enumerate(ops)}
    fig, ax = plt.subplots(figsize=(8, 0.5 * ts.p + 1.5))
    for t in ts.tasks:
        start, width = float(t.start), float(t.end - t.start)
        ax.barh(t.core, width, left=start, color=colour[t.op], edgecolor="black", linewidth=0.5)
        if width > 0:
            ax.text(start + width / 2, t.core, f"{t.op}.{t.unit}", ha="center", va="center", fontsize=7)
    ax.set_yticks(range(ts.p))
    ax.set_yticklabels([f"core {k}" for k in range(ts.p)])
    ax.invert_yaxis()
    ax.set_xlabel("time (s)")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def parity(measured, predicted, path: str | Path, title: str | None = None) -> Path:
    """Predicted against measured cost, with the identity line."""
    path = Path(path)
    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    ax.scatter(measured, predicted, s=12)
    lo = min(min(measured), min(predicted))
    hi = max(max(measured), max(predicted))
    ax.plot([lo, hi], [lo, hi], color="grey", linewidth=1, linestyle="--")
    ax.set_xlabel("measured time (s)")
    ax.set_ylabel("predicted time (s)")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
