"""Figures written next to the text reports."""

from __future__ import annotations

from collections import Counter
from typing import Iterable, Mapping

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

# fixed metadata keeps PNG output byte-stable between runs
_PNG_META = {"Software": None}

plt.rcParams.update({
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 120,
})


def plot_mode_comparison(macros: Mapping[str, Mapping[str, float]], path, metrics=("hit1", "precision", "recall", "f1")):
    """Grouped bars: one group per metric, one bar per mode."""
    modes = list(macros)
    fig, ax = plt.subplots(figsize=(6.4, 3.6))
    width = 0.8 / max(len(modes), 1)
    for i, mode in enumerate(modes):
        xs = [j + i * width for j in range(len(metrics))]
        ax.bar(xs, [100 * macros[mode][m] for m in metrics], width, label=mode)
    ax.set_xticks([j + width * (len(modes) - 1) / 2 for j in range(len(metrics))])
    ax.set_xticklabels(["Hit@1" if m == "hit1" else m.capitalize() for m in metrics])
    ax.set_ylabel("%")
    ax.set_ylim(0, 100)
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    fig.savefig(path, metadata=_PNG_META)
    plt.close(fig)


def hop_histogram(hops: Iterable[int | None]) -> dict[str, int]:
    counts = Counter("unknown" if h is None else str(h) for h in hops)
    known = sorted((k for k in counts if k != "unknown"), key=int)
    out = {k: counts[k] for k in known}
    if "unknown" in counts:
        out["unknown"] = counts["unknown"]
    return out


def plot_hop_histogram(counts: Mapping[str, int], path, title: str = ""):
    total = sum(counts.values()) or 1
    fig, ax = plt.subplots(figsize=(4.8, 3.2))
    keys = list(counts)
    bars = ax.bar(keys, [100 * counts[k] / total for k in keys], color="#4c72b0")
    for bar, k in zip(bars, keys):
        ax.annotate(f"{100 * counts[k] / total:.1f}%", (bar.get_x() + bar.get_width() / 2, bar.get_height()),
                    ha="center", va="bottom", fontsize=7)
    ax.set_xlabel("hops")
    ax.set_ylabel("% of questions")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, metadata=_PNG_META)
    plt.close(fig)
