"""Experiment harness: backend timing comparisons and restart sweeps.

Reports are plain dataclasses that serialize to line-delimited JSON records
plus a human-readable table; timing uses a monotonic clock and excludes
corpus loading and parameter I/O.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .constraints import ConstraintSet
from .errors import StructuraError
from .exact import ExactConfig
from .randomized import RandConfig
from .scoring import ScorerBank
from .training import (
    Backend,
    Corpus,
    metrics_from_predictions,
    run_backend,
)


@dataclass
class BackendTiming:
    backend: str
    rep_seconds: list[float]
    mean_score: float
    failures: list[str] = field(default_factory=list)

    @property
    def mean_s(self) -> float:
        return float(np.mean(self.rep_seconds))

    @property
    def std_s(self) -> float:
        return float(np.std(self.rep_seconds))


@dataclass
class BenchReport:
    timings: list[BackendTiming]
    reps: int
    corpus_size: int

    def speedup(self, slow: str, fast: str) -> float:
        by_name = {t.backend: t for t in self.timings}
        return by_name[slow].mean_s / by_name[fast].mean_s

    def records(self) -> list[dict]:
        out = []
        for t in self.timings:
            out.append(
                {
                    "record": "backend_timing",
                    "backend": t.backend,
                    "mean_s": t.mean_s,
                    "std_s": t.std_s,
                    "rep_seconds": t.rep_seconds,
                    "mean_score": t.mean_score,
                    "failures": t.failures,
                    "reps": self.reps,
                    "corpus_size": self.corpus_size,
                }
            )
        for slow in self.timings:
            for fast in self.timings:
                out.append(
                    {
                        "record": "speedup",
                        "slow": slow.backend,
                        "fast": fast.backend,
                        "factor": slow.mean_s / fast.mean_s,
                    }
                )
        return out

    def table(self) -> str:
        lines = [
            f"inference timing over {self.corpus_size} graphs x {self.reps} reps",
            f"{'backend':<10} {'mean s':>10} {'std s':>10} {'mean score':>12} {'failures':>9}",
            "-" * 55,
        ]
        for t in self.timings:
            lines.append(
                f"{t.backend:<10} {t.mean_s:>10.4f} {t.std_s:>10.4f} "
                f"{t.mean_score:>12.4f} {len(t.failures):>9}"
            )
        names = [t.backend for t in self.timings]
        if len(names) > 1:
            lines.append("")
            lines.append("speedup factors (row time / column time)")
            lines.append("          " + "".join(f"{n:>10}" for n in names))
            for slow in names:
                row = f"{slow:<10}"
                for fast in names:
                    row += f"{self.speedup(slow, fast):>10.2f}"
                lines.append(row)
        return "\n".join(lines)


def bench_inference(
    corpus: Corpus,
    bank: ScorerBank,
    cs: Optional[ConstraintSet],
    backends: list[Backend],
    rand_cfg: Optional[RandConfig] = None,
    exact_cfg: Optional[ExactConfig] = None,
    reps: int = 5,
) -> BenchReport:
    """Time each backend over the whole corpus, repeated ``reps`` times.

    Per-graph failures are recorded, excluded from the means, and flagged in
    the report. Backends run sequentially so timings are uncontended.
    """
    if reps < 1:
        raise StructuraError("reps must be >= 1")
    timings = []
    for backend in backends:
        rep_seconds = []
        failures: list[str] = []
        scores: list[float] = []
        for rep in range(reps):
            total = 0.0
            rep_scores = []
            for g in corpus.graphs:
                t0 = time.perf_counter()
                try:
                    res = run_backend(
                        g, bank, cs, backend, rand_cfg=rand_cfg, exact_cfg=exact_cfg
                    )
                except StructuraError as exc:
                    if rep == 0:
                        failures.append(f"{g.id}: {exc}")
                    continue
                total += time.perf_counter() - t0
                rep_scores.append(res.score)
            rep_seconds.append(total)
            if rep == 0:
                scores = rep_scores
        timings.append(
            BackendTiming(
                backend=backend.value,
                rep_seconds=rep_seconds,
                mean_score=float(np.mean(scores)) if scores else float("nan"),
                failures=failures,
            )
        )
    return BenchReport(timings=timings, reps=reps, corpus_size=corpus.n)


@dataclass
class SweepPoint:
    restarts: int
    mean_score_ratio: float
    min_score_ratio: float
    avg_f1_ratio: float
    time_ratio: float

    def to_dict(self) -> dict:
        return {
            "record": "sweep_point",
            "restarts": self.restarts,
            "mean_score_ratio": self.mean_score_ratio,
            "min_score_ratio": self.min_score_ratio,
            "avg_f1_ratio": self.avg_f1_ratio,
            "time_ratio": self.time_ratio,
        }


@dataclass
class SweepReport:
    points: list[SweepPoint]
    exact_avg_f1: float
    exact_time_s: float
    corpus_size: int

    def records(self) -> list[dict]:
        head = {
            "record": "sweep_reference",
            "exact_avg_f1": self.exact_avg_f1,
            "exact_time_s": self.exact_time_s,
            "corpus_size": self.corpus_size,
        }
        return [head] + [p.to_dict() for p in self.points]

    def table(self) -> str:
        lines = [
            f"restart sweep over {self.corpus_size} graphs "
            f"(reference: exact avg F1 {self.exact_avg_f1:.4f}, "
            f"{self.exact_time_s:.4f}s)",
            f"{'restarts':>8} {'score ratio':>12} {'min ratio':>10} "
            f"{'avg F1 ratio':>13} {'time ratio':>11}",
            "-" * 58,
        ]
        for p in self.points:
            lines.append(
                f"{p.restarts:>8} {p.mean_score_ratio:>12.4f} "
                f"{p.min_score_ratio:>10.4f} {p.avg_f1_ratio:>13.4f} "
                f"{p.time_ratio:>11.4f}"
            )
        return "\n".join(lines)


def _safe_ratio(value: float, reference: float) -> float:
    if abs(reference) > 1e-12:
        return value / reference
    return 1.0 if abs(value) <= 1e-12 else 0.0


def sweep_restarts(
    corpus: Corpus,
    bank: ScorerBank,
    cs: Optional[ConstraintSet],
    restart_list: list[int],
    rand_cfg: Optional[RandConfig] = None,
    exact_cfg: Optional[ExactConfig] = None,
) -> SweepReport:
    """Randomized-vs-exact quality and time ratios per restart count.

    For each restart count, test-time inference runs with the randomized
    constrained backend and is compared against exact inference: per-graph
    score ratios, corpus metric ratio, and wall-time ratio.
    """
    base_cfg = rand_cfg or RandConfig()
    exact_scores = []
    exact_preds = []
    t0 = time.perf_counter()
    for g in corpus.graphs:
        res = run_backend(g, bank, cs, Backend.EXACT, exact_cfg=exact_cfg)
        exact_scores.append(res.score)
        exact_preds.append(res.assignment)
    exact_time = time.perf_counter() - t0
    exact_metrics = metrics_from_predictions(corpus, exact_preds)

    points = []
    for r in restart_list:
        cfg = RandConfig(
            restarts=r,
            constrained=base_cfg.constrained,
            hamming_mode=base_cfg.hamming_mode,
            hamming_weight=base_cfg.hamming_weight,
            seed=base_cfg.seed,
            max_moves=base_cfg.max_moves,
            greedy_edge_labels=base_cfg.greedy_edge_labels,
            relabel_each_candidate=base_cfg.relabel_each_candidate,
        )
        backend = (
            Backend.RAND_CONSTRAINED if cfg.constrained else Backend.RAND_UNCONSTRAINED
        )
        preds = []
        ratios = []
        t0 = time.perf_counter()
        for g, exact_score in zip(corpus.graphs, exact_scores):
            res = run_backend(g, bank, cs, backend, rand_cfg=cfg)
            preds.append(res.assignment)
            ratios.append(_safe_ratio(res.score, exact_score))
        elapsed = time.perf_counter() - t0
        metrics = metrics_from_predictions(corpus, preds, exact_eval=False)
        points.append(
            SweepPoint(
                restarts=r,
                mean_score_ratio=float(np.mean(ratios)),
                min_score_ratio=float(np.min(ratios)),
                avg_f1_ratio=_safe_ratio(metrics.avg_f1, exact_metrics.avg_f1),
                time_ratio=_safe_ratio(elapsed, exact_time),
            )
        )
    return SweepReport(
        points=points,
        exact_avg_f1=exact_metrics.avg_f1,
        exact_time_s=exact_time,
        corpus_size=corpus.n,
    )


def write_records(records: list[dict], path) -> None:
    """Line-delimited JSON, one record per line, deterministic key order."""
    lines = [json.dumps(rec, sort_keys=True) for rec in records]
    Path(path).write_text("\n".join(lines) + "\n")


def write_history(history, path) -> None:
    write_records([rec.to_dict() for rec in history], path)
