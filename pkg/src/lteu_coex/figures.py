"""Figure rendering for CLI reports.

Every report command writes delimited data first; these helpers render the
matching plot next to it.  All output goes through the Agg backend so runs
are headless-safe.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)


def _finish(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_pmf(times_us, probs, path: Path, title: str) -> Path:
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(times_us, probs, lw=0.8)
    ax.set_xlabel("contention duration (us)")
    ax.set_ylabel("probability")
    ax.set_title(title)
    ax.set_yscale("log")
    return _finish(fig, path)


def plot_delay_hist(counts_by_alpha: dict[int, dict[int, int]], path: Path,
                    title: str) -> Path:
    fig, ax = plt.subplots(figsize=(7, 4))
    for alpha, counts in sorted(counts_by_alpha.items()):
        ages = sorted(counts)
        total = sum(counts.values())
        ax.plot(ages, [counts[a] / total for a in ages], marker="o", ms=3,
                label=f"subframe {alpha}")
    ax.set_xlabel("CSI age (subframes)")
    ax.set_ylabel("probability")
    ax.set_title(title)
    ax.legend()
    return _finish(fig, path)


def plot_sweep(rows: list[dict], x_key: str, y_keys: list[str],
               series_key: str | None, path: Path, title: str,
               ylabel: str) -> Path:
    """Line plot of sweep output rows, one line per (y key, series value)."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    series_values = sorted({row[series_key] for row in rows}) if series_key else [None]
    for y_key in y_keys:
        for sv in series_values:
            pts = [(row[x_key], row[y_key]) for row in rows
                   if series_key is None or row[series_key] == sv]
            pts.sort()
            label = y_key if sv is None else f"{y_key} ({series_key}={sv})"
            ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o",
                    ms=4, label=label)
    ax.set_xlabel(x_key)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.legend(fontsize=8)
    return _finish(fig, path)


def plot_trace(trace, path: Path, title: str, x_label: str) -> Path:
    fig, ax = plt.subplots(figsize=(7, 4))
    xs = [t[0] for t in trace]
    ys = [t[1] for t in trace]
    ax.plot(xs, ys, "o-", ms=4, lw=0.8)
    ax.set_xlabel(x_label)
    ax.set_ylabel("energy efficiency (Mbit/J)")
    ax.set_title(title)
    return _finish(fig, path)
