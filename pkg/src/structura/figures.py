"""Figure rendering for harness reports.

Every report the harness writes as delimited text can also be rendered to a
PNG next to it. Rendering is presentation-only: nothing here feeds back into
any computation.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .harness import BenchReport, SweepReport


def render_bench_figure(report: BenchReport, path) -> Path:
    """Bar chart of mean per-backend inference time with stddev whiskers."""
    names = [t.backend for t in report.timings]
    means = [t.mean_s for t in report.timings]
    stds = [t.std_s for t in report.timings]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(names, means, yerr=stds, capsize=4, color="#4878a8")
    ax.set_ylabel("inference time per corpus pass (s)")
    ax.set_title(f"{report.corpus_size} graphs, {report.reps} reps")
    ax.grid(axis="y", linestyle="--", alpha=0.5)
    fig.tight_layout()
    out = Path(path)
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out


def render_sweep_figure(report: SweepReport, path) -> Path:
    """Two panels: score/metric ratios and time ratio versus restart count."""
    xs = [p.restarts for p in report.points]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4))
    ax1.plot(xs, [p.mean_score_ratio for p in report.points], "s-", label="score ratio")
    ax1.plot(xs, [p.avg_f1_ratio for p in report.points], "^-", label="avg F1 ratio")
    ax1.axhline(1.0, color="black", linewidth=1)
    ax1.set_xlabel("restarts")
    ax1.set_ylabel("randomized / exact")
    ax1.legend()
    ax1.grid(linestyle="--", alpha=0.5)
    ax2.plot(xs, [p.time_ratio for p in report.points], "o-", color="#a84848")
    ax2.axhline(1.0, color="black", linewidth=1)
    ax2.set_xlabel("restarts")
    ax2.set_ylabel("time ratio")
    ax2.grid(linestyle="--", alpha=0.5)
    fig.tight_layout()
    out = Path(path)
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out


def render_history_figure(history, path) -> Path:
    """Train/dev loss curves per epoch."""
    xs = [rec.epoch for rec in history]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(xs, [rec.train_loss for rec in history], "o-", label="train loss")
    ax.plot(xs, [rec.dev_loss for rec in history], "s-", label="dev loss")
    ax.set_xlabel("epoch")
    ax.set_ylabel("summed hinge loss")
    ax.legend()
    ax.grid(linestyle="--", alpha=0.5)
    fig.tight_layout()
    out = Path(path)
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out
