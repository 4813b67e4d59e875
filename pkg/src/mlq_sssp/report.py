"""Figure rendering for benchmark record sets.

Plots are written next to the delimited output: a CDF of relative
performance per configuration and a bar chart of the per-config means.
"""

from __future__ import annotations

from typing import Dict, List, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .adaptive import BenchmarkRecord


def _by_label(records: Sequence[BenchmarkRecord]) -> Dict[str, List[float]]:
    groups: Dict[str, List[float]] = {}
    for r in records:
        groups.setdefault(r.label(), []).append(r.relative_performance)
    return groups


def render_bench_figures(records: Sequence[BenchmarkRecord],
                         out_base: str) -> List[str]:
    """Render the rp CDF and mean-rp bar chart; returns the file paths."""
    groups = _by_label(records)
    paths: List[str] = []

    fig, ax = plt.subplots(figsize=(8, 5))
    for label in sorted(groups):
        vals = sorted(groups[label])
        n = len(vals)
        ys = [(i + 1) / n for i in range(n)]
        ax.step(vals, ys, where="post", label=label)
    ax.set_xlabel("relative performance (best time / time)")
    ax.set_ylabel("fraction of graphs")
    ax.set_title("Relative performance CDF per configuration")
    ax.set_xlim(0.0, 1.05)
    ax.set_ylim(0.0, 1.05)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=7, loc="upper left")
    cdf_path = f"{out_base}_rp_cdf.png"
    fig.savefig(cdf_path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    paths.append(cdf_path)

    means = {label: sum(v) / len(v) for label, v in groups.items()}
    order = sorted(means, key=means.get, reverse=True)
    fig, ax = plt.subplots(figsize=(8, 4.5))
    ax.bar(range(len(order)), [means[label] for label in order])
    ax.set_xticks(range(len(order)))
    ax.set_xticklabels(order, rotation=45, ha="right", fontsize=7)
    ax.set_ylabel("mean relative performance")
    ax.set_title("Mean relative performance per configuration")
    ax.set_ylim(0.0, 1.05)
    ax.grid(True, axis="y", alpha=0.3)
    mean_path = f"{out_base}_rp_mean.png"
    fig.savefig(mean_path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    paths.append(mean_path)
    return paths
