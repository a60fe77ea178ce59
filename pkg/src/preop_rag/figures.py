"""Matplotlib renderings of the headline report tables.

Three figures accompany the delimited output: fitness accuracy per agent,
hallucination rate per agent, and fitness accuracy stratified by ASA
class. All rendering uses the Agg backend and writes PNG files; the
delimited tables remain the canonical machine-readable output.
"""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

_BAR_COLOR = "#4878a8"
_REFERENCE_COLOR = "#b05050"


def _bar_figure(
    labels: Sequence[str],
    values: Sequence[float],
    *,
    title: str,
    ylabel: str,
    path: Path,
    highlight: str | None = None,
) -> None:
    width = max(6.0, 0.45 * len(labels) + 2.0)
    fig, ax = plt.subplots(figsize=(width, 4.5))
    colors = [
        _REFERENCE_COLOR if label == highlight else _BAR_COLOR for label in labels
    ]
    ax.bar(range(len(labels)), values, color=colors)
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=60, ha="right", fontsize=7)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.set_ylim(0, 105)
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_fitness_accuracy(
    accuracy_pct: Mapping[str, float], path: Path | str, reference: str | None = None
) -> Path:
    path = Path(path)
    labels = list(accuracy_pct)
    _bar_figure(
        labels,
        [accuracy_pct[k] for k in labels],
        title="Fitness-for-surgery accuracy by agent",
        ylabel="accuracy (%)",
        path=path,
        highlight=reference,
    )
    return path


def render_hallucination_rates(
    rates_pct: Mapping[str, float], path: Path | str
) -> Path:
    path = Path(path)
    labels = list(rates_pct)
    _bar_figure(
        labels,
        [rates_pct[k] for k in labels],
        title="Hallucination rate by agent",
        ylabel="hallucination rate (%)",
        path=path,
    )
    return path


def render_asa_accuracy(
    by_asa: Mapping[int, Mapping[str, float]], path: Path | str
) -> Path:
    """Grouped bars: one cluster per ASA class, one bar per agent."""
    path = Path(path)
    classes = sorted(by_asa)
    agents = sorted({agent for cells in by_asa.values() for agent in cells})
    width = max(6.0, 0.35 * len(agents) * max(1, len(classes)))
    fig, ax = plt.subplots(figsize=(min(width, 16.0), 4.5))
    cluster_width = 0.8
    bar_width = cluster_width / max(1, len(agents))
    cmap = plt.get_cmap("tab20")
    for j, agent in enumerate(agents):
        xs = [
            i - cluster_width / 2 + bar_width * (j + 0.5)
            for i, cls in enumerate(classes)
            if agent in by_asa[cls]
        ]
        ys = [by_asa[cls][agent] for cls in classes if agent in by_asa[cls]]
        ax.bar(xs, ys, width=bar_width, label=agent, color=cmap(j % 20))
    ax.set_xticks(range(len(classes)))
    ax.set_xticklabels([f"ASA {cls}" for cls in classes])
    ax.set_ylabel("fitness accuracy (%)")
    ax.set_title("Fitness accuracy stratified by ASA class")
    ax.set_ylim(0, 105)
    ax.grid(axis="y", alpha=0.3)
    if agents:
        ax.legend(fontsize=6, ncol=2)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
