"""Matplotlib renderings of the rank analyses and comparison reports.

Everything draws on the non-interactive Agg backend and writes PNG files
next to the delimited outputs; callers that want other tooling can consume
ranks.json / report.csv instead.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .analysis import RankAnalysis
from .reporting import MetricsReport


def _bucket_labels(edges) -> list[str]:
    return [f"{edges[b] + 1}-{edges[b + 1]}" for b in range(len(edges) - 1)]


def save_rank_figures(analysis: RankAnalysis, out_dir: str | Path) -> list[Path]:
    """Good-response ratio per PPL-rank bucket, and the selected-rank histogram."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    labels = _bucket_labels(analysis.bucket_edges)
    written = []

    fig, ax = plt.subplots(figsize=(8, 4.5))
    ax.bar(range(len(labels)), analysis.good_ratio_per_bucket, color="#4878cf")
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=45, ha="right", fontsize=8)
    ax.set_xlabel("PPL rank bucket (1 = lowest PPL)")
    ax.set_ylabel("good-response ratio")
    ax.set_ylim(0, 1)
    fig.tight_layout()
    path = out_dir / "rank_good_ratio.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(8, 4.5))
    ax.bar(range(len(labels)), analysis.selected_rank_histogram, color="#d65f5f")
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=45, ha="right", fontsize=8)
    ax.set_xlabel("PPL rank bucket of the selected response")
    ax.set_ylabel("instances")
    ax.set_title(f"mean selected rank: {analysis.mean_selected_rank:.1f}")
    fig.tight_layout()
    path = out_dir / "selected_rank_hist.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    written.append(path)
    return written


def save_report_figure(report: MetricsReport, out_dir: str | Path) -> Path:
    """Normalized Avg / Avg-R per system as a grouped bar chart."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    names = [row["system_name"] for row in report.rows]
    avg = [row["avg"] for row in report.rows]
    avg_r = [row["avg_r"] for row in report.rows]

    x = range(len(names))
    width = 0.38
    fig, ax = plt.subplots(figsize=(max(6, 1.6 * len(names)), 4.5))
    ax.bar([i - width / 2 for i in x], avg, width, label="Avg", color="#4878cf")
    ax.bar([i + width / 2 for i in x], avg_r, width, label="Avg-R", color="#6acc65")
    ax.set_xticks(list(x))
    ax.set_xticklabels(names, rotation=20, ha="right", fontsize=9)
    ax.set_ylabel("normalized score")
    ax.set_ylim(0, 1)
    ax.legend()
    fig.tight_layout()
    path = out_dir / "report_scores.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
