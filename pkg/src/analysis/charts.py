"""
Static SVG charts for the statistics and lifestyle reports.

Uses the non-interactive Agg backend; SVG ids are salted with a fixed
string and the date metadata is dropped so repeated runs write identical
files.
"""

import logging
from pathlib import Path
from typing import Mapping, Optional, Sequence, Tuple, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .stats import BoxStats, ShareSeries  # noqa: E402

logger = logging.getLogger(__name__)

plt.rcParams["svg.hashsalt"] = "lifemine"
plt.rcParams["svg.fonttype"] = "none"

SVG_METADATA = {"Date": None, "Creator": None}


def save_svg(fig, path: Union[str, Path]) -> Path:
    """Save figure to output directory and release it."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", bbox_inches="tight", metadata=SVG_METADATA)
    plt.close(fig)
    logger.info(f"Chart saved: {path}")
    return path


def share_chart(series: ShareSeries, path: Union[str, Path], title: Optional[str] = None) -> Path:
    """Stacked area of category shares per bucket, with the remainder as 'other'."""
    fig, ax = plt.subplots(figsize=(10, 5))
    x = np.arange(len(series.buckets))
    layers = [series.shares[:, i] for i in range(len(series.categories))] + [series.other()]
    ax.stackplot(x, *layers, labels=list(series.categories) + ["other"])
    ax.set_xticks(x)
    ax.set_xticklabels(series.labels, fontsize=8)
    ax.set_ylim(0, 1)
    ax.set_ylabel("share of check-ins")
    ax.set_title(title or f"Category shares ({series.bucketing}, {series.day_filter})")
    ax.legend(loc="upper left", bbox_to_anchor=(1.01, 1.0), fontsize=8)
    return save_svg(fig, path)


def box_chart(boxes: Mapping[str, BoxStats], path: Union[str, Path], title: str = "Visiting frequency") -> Path:
    """Box plot drawn from precomputed five-number summaries."""
    fig, ax = plt.subplots(figsize=(max(6, 0.6 * len(boxes)), 5))
    summaries = [
        {"label": name, "whislo": b.minimum, "q1": b.q1, "med": b.median, "q3": b.q3, "whishi": b.maximum}
        for name, b in boxes.items()
    ]
    if summaries:
        ax.bxp(summaries, showfliers=False)
    ax.set_ylabel("visits per visitor")
    ax.set_title(title)
    plt.setp(ax.get_xticklabels(), rotation=60, ha="right", fontsize=8)
    return save_svg(fig, path)


def ccdf_chart(points: Sequence[Tuple[float, float]], path: Union[str, Path],
               title: str = "Check-ins per venue") -> Path:
    """Log-log CCDF; non-positive thresholds are left out of the log axis."""
    fig, ax = plt.subplots(figsize=(6, 5))
    kept = [(v, p) for v, p in points if v > 0]
    if kept:
        xs, ys = zip(*kept)
        ax.loglog(xs, ys, marker=".", linestyle="-")
    ax.set_xlabel("check-ins")
    ax.set_ylabel("P(X >= x)")
    ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    return save_svg(fig, path)


def profile_chart(profiles: np.ndarray, labels: Sequence[str], names: Sequence[str],
                  path: Union[str, Path], title: str = "Lifestyle profiles") -> Path:
    """One line per component over the time (or category) axis."""
    fig, ax = plt.subplots(figsize=(10, 4))
    x = np.arange(len(labels))
    for row, name in zip(np.atleast_2d(profiles), names):
        ax.plot(x, row, marker="o", ms=3, label=name)
    ax.set_xticks(x)
    ax.set_xticklabels(labels, fontsize=8)
    ax.set_title(title)
    ax.legend(fontsize=8)
    return save_svg(fig, path)
