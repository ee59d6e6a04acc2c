"""Matplotlib renderings for benchmark artifacts.

Every report path writes static figures next to the delimited output: a
grouped mean-cost bar chart with standard-deviation error bars, and the
cost-versus-MC-samples curve for sweep runs.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt


def save_cost_bars(rows: list[dict], title: str, path: str | Path) -> Path:
    """Bar chart of mean cost per (policy, version) with std error bars."""
    labels = [
        f"{r['policy']}\n({r['version']})" if r.get("version") else r["policy"]
        for r in rows
    ]
    means = [r["mean_cost"] for r in rows]
    stds = [r["std_cost"] for r in rows]
    fig, ax = plt.subplots(figsize=(max(4.0, 1.1 * len(rows)), 3.6))
    x = range(len(rows))
    colors = ["#4878a8" if r.get("version") == "Base" else "#e1812c" for r in rows]
    ax.bar(x, means, yerr=stds, capsize=4, color=colors)
    ax.set_xticks(list(x))
    ax.set_xticklabels(labels, fontsize=8)
    ax.set_ylabel("total waiting time (minutes)")
    ax.set_title(title, fontsize=10)
    ax.margins(y=0.15)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def save_mc_curve(points: list[tuple[int, float]], title: str, path: str | Path) -> Path:
    """Mean cost versus number of sampled Monte Carlo futures."""
    fig, ax = plt.subplots(figsize=(4.8, 3.4))
    xs = [p[0] for p in points]
    ys = [p[1] for p in points]
    ax.plot(xs, ys, marker="o", color="#4878a8")
    ax.set_xscale("log")
    ax.set_xticks(xs)
    ax.get_xaxis().set_major_formatter(matplotlib.ticker.ScalarFormatter())
    ax.set_xlabel("MC futures sampled")
    ax.set_ylabel("mean total waiting time (minutes)")
    ax.set_title(title, fontsize=10)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
