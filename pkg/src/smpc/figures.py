"""Render the CSV report data as matplotlib figures saved next to the CSVs.

The CSVs remain the authoritative, deterministic output; these PNGs are a
convenience rendering of the same data (cost/exploration traces, XY
trajectories, cost-distribution histograms, paired comparison totals).
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .envs import EnvModel
from .experiment import ComparisonReport, ExperimentRecord


def save_run_figures(
    records: list[ExperimentRecord], env: EnvModel, out_dir, label: str = ""
) -> list[Path]:
    """Per-run figures: cost + exploration traces, and XY tracks if the
    environment exposes planar positions."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    fig, (ax_cost, ax_expl) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    for record in records:
        steps = [row.step for row in record.rows]
        ax_cost.plot(steps, [row.cum_cost for row in record.rows], lw=0.8, alpha=0.7)
        ax_expl.plot(steps, [row.exploration for row in record.rows], lw=0.8, alpha=0.7)
    ax_cost.set_ylabel("cumulative cost")
    ax_expl.set_ylabel("exploration magnitude")
    ax_expl.set_xlabel("step")
    ax_expl.set_yscale("log")
    fig.suptitle(f"{label or env.name}: per-seed traces")
    fig.tight_layout()
    path = out / "traces.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)

    if env.xy_tracks:
        fig, ax = plt.subplots(figsize=(6, 6))
        colors = plt.rcParams["axes.prop_cycle"].by_key()["color"]
        for t, (track_label, (ix, iy)) in enumerate(env.xy_tracks):
            color = colors[t % len(colors)]
            for k, record in enumerate(records):
                xs = [row.state[ix] for row in record.rows]
                ys = [row.state[iy] for row in record.rows]
                ax.plot(xs, ys, lw=0.8, alpha=0.6, color=color,
                        label=track_label if k == 0 else None)
        wps = np.asarray(env.task.waypoints)
        ax.plot(wps[:, 0], wps[:, 1], "k*", ms=12, label="waypoints")
        ax.set_xlabel("x")
        ax.set_ylabel("y")
        ax.set_aspect("equal", adjustable="datalim")
        ax.legend(loc="best", fontsize=8)
        fig.suptitle(f"{label or env.name}: XY trajectories")
        fig.tight_layout()
        path = out / "trajectory_xy.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)
    return written


def save_histogram_figure(rows, path, title: str = "cost distribution") -> Path:
    """Bar rendering of summarize_costs output (one series per label)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    labels = []
    for row in rows:
        if row[0] not in labels:
            labels.append(row[0])
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for label in labels:
        mine = [r for r in rows if r[0] == label]
        centers = [(r[1] + r[2]) / 2 for r in mine]
        widths = [r[2] - r[1] for r in mine]
        ax.bar(centers, [r[4] for r in mine], width=widths, alpha=0.5, label=label)
    ax.set_xlabel("cost")
    ax.set_ylabel("density")
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def save_compare_figures(report: ComparisonReport, out_dir) -> list[Path]:
    """Comparison figures: cost-distribution overlay and paired per-seed totals."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    kind = "episode totals" if report.per_episode_hist else "per-step costs"
    written = [
        save_histogram_figure(report.histogram, out / "compare_hist.png",
                              title=f"cost distribution ({kind})")
    ]
    fig, ax = plt.subplots(figsize=(7, 4.5))
    x = np.arange(len(report.seeds))
    for label in report.labels:
        ax.plot(x, report.totals[label], "o-", ms=4, lw=0.8, alpha=0.8,
                label=f"{label} (median {report.medians[label]:.3g})")
    ax.set_xticks(x)
    ax.set_xticklabels([str(s) for s in report.seeds], fontsize=7)
    ax.set_xlabel("seed")
    ax.set_ylabel("episode total cost")
    ax.set_yscale("log")
    ax.legend()
    fig.tight_layout()
    path = out / "compare_per_seed.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)
    return written
