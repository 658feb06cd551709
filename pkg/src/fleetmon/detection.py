"""Anomaly scoring, debouncing, the sigma-band baseline, and P/R/F1 metrics."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .clustering import Partition
from .errors import DegenerateFleet, LengthMismatch

logger = logging.getLogger(__name__)

DEFAULT_ANOMALY_THRESHOLD = 2.0 / 3.0
DEFAULT_DEBOUNCE_WINDOWS = 5


@dataclass(frozen=True)
class WindowVerdict:
    """Per-machine outcome of one analysis window.

    ``score`` is the fraction of the fleet outside the machine's cluster;
    machines excluded from the window (preprocessing failure) carry None.
    """

    window_index: int
    scores: Mapping[str, float | None]
    cluster_ids: Mapping[str, int | None]
    instant_anomalous: Mapping[str, bool | None]
    debounced_faulty: Mapping[str, bool]


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    def __post_init__(self) -> None:
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(
            self.tp + other.tp, self.fp + other.fp, self.fn + other.fn, self.tn + other.tn
        )


@dataclass(frozen=True)
class Metrics:
    precision: float
    recall: float
    f1: float
    degenerate: bool = False  # any 0/0 ratio was defined as 0


def score(partition: Partition, n_machines: int) -> dict[str, float]:
    """Anomaly score per machine: fraction of the fleet outside its cluster."""
    covered = sum(len(c) for c in partition.clusters)
    if covered != n_machines:
        raise ValueError(f"partition covers {covered} machines, expected {n_machines}")
    return {
        mid: (n_machines - len(cluster)) / n_machines
        for cluster in partition.clusters
        for mid in sorted(cluster)
    }


def classify(
    scores: Mapping[str, float],
    thr_ad: float = DEFAULT_ANOMALY_THRESHOLD,
) -> dict[str, bool]:
    """A machine is anomalous when its score strictly exceeds the threshold."""
    return {mid: s > thr_ad for mid, s in scores.items()}


def debounce(history: Sequence[bool | None], n: int = DEFAULT_DEBOUNCE_WINDOWS) -> list[bool]:
    """Faulty at window t iff anomalous at every one of the last n windows.

    ``None`` entries (machine excluded from a window) reset the run, so stale
    evidence never carries across gaps. The verdict is non-latching: it
    clears as soon as the consecutive condition breaks.
    """
    if n < 1:
        raise ValueError(f"debounce length must be >= 1, got {n}")
    out: list[bool] = []
    run = 0
    for flag in history:
        run = run + 1 if flag else 0
        out.append(run >= n)
    return out


def sigma_band_baseline(
    indicators: Mapping[str, Sequence[float]] | Mapping[str, float],
    sigma: float,
    leave_one_out: bool = False,
    strict: bool = False,
) -> dict[str, bool]:
    """Classic fleet detector: a machine is faulty when any indicator dimension
    lies outside mean +/- sigma * sd of the fleet.

    The band includes the machine under test by default; ``leave_one_out``
    recomputes mean/sd without it. Standard deviation uses the population
    form. When every dimension has zero spread the fleet is structureless:
    all machines are reported healthy unless ``strict`` is set, which raises
    ``DegenerateFleet`` instead.
    """
    ids = list(indicators)
    if len(ids) < 2:
        raise ValueError("the sigma band needs at least two machines")
    rows = np.atleast_2d(np.asarray([indicators[m] for m in ids], dtype=np.float64))
    if rows.shape[0] != len(ids):
        rows = rows.T
    if not np.all(np.isfinite(rows)):
        raise ValueError("indicators contain NaN or infinite values")
    if np.all(rows.std(axis=0) == 0):
        if strict:
            raise DegenerateFleet("all indicator dimensions are identical across the fleet")
        logger.warning("sigma band: zero spread in every dimension; reporting all healthy")
        return {m: False for m in ids}
    verdict: dict[str, bool] = {}
    for i, mid in enumerate(ids):
        pool = np.delete(rows, i, axis=0) if leave_one_out else rows
        mu = pool.mean(axis=0)
        sd = pool.std(axis=0)
        verdict[mid] = bool(np.any(np.abs(rows[i] - mu) > sigma * sd))
    return verdict


def confusion(pred: Sequence[bool], truth: Sequence[bool]) -> ConfusionCounts:
    if len(pred) != len(truth):
        raise LengthMismatch(f"{len(pred)} predictions vs {len(truth)} labels")
    tp = fp = fn = tn = 0
    for p, t in zip(pred, truth):
        if p and t:
            tp += 1
        elif p and not t:
            fp += 1
        elif not p and t:
            fn += 1
        else:
            tn += 1
    return ConfusionCounts(tp, fp, fn, tn)


def f1_score(precision: float, recall: float) -> float:
    """Harmonic mean of precision and recall; 0 when both are 0."""
    if precision + recall == 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def metrics(counts: ConfusionCounts) -> Metrics:
    """Precision, recall, and F1. 0/0 ratios are defined as 0 and flagged."""
    degenerate = False
    if counts.tp + counts.fp == 0:
        precision, degenerate = 0.0, True
    else:
        precision = counts.tp / (counts.tp + counts.fp)
    if counts.tp + counts.fn == 0:
        recall, degenerate = 0.0, True
    else:
        recall = counts.tp / (counts.tp + counts.fn)
    return Metrics(precision, recall, f1_score(precision, recall), degenerate)


@dataclass(frozen=True)
class SweepRow:
    parameter: float
    metrics: Metrics
    counts: ConfusionCounts


@dataclass(frozen=True)
class SweepTable:
    """Metrics across a parameter grid, one row per grid value."""

    parameter_name: str
    rows: tuple[SweepRow, ...]

    def best_f1(self) -> SweepRow:
        return max(self.rows, key=lambda r: r.metrics.f1)

    def to_json_obj(self) -> dict:
        return {
            "parameter": self.parameter_name,
            "rows": [
                {
                    "value": r.parameter,
                    "precision": r.metrics.precision,
                    "recall": r.metrics.recall,
                    "f1": r.metrics.f1,
                    "counts": {
                        "tp": r.counts.tp,
                        "fp": r.counts.fp,
                        "fn": r.counts.fn,
                        "tn": r.counts.tn,
                    },
                }
                for r in self.rows
            ],
        }

    def format_text(self, label: str = "") -> str:
        """Aligned plain-text table: one column per grid value, one row per metric."""
        def fmt(v: float) -> str:
            return f"{v:.3f}"

        header = ["Metric"] + [f"{r.parameter:g}" for r in self.rows]
        lines = [
            ["Precision"] + [fmt(r.metrics.precision) for r in self.rows],
            ["Recall"] + [fmt(r.metrics.recall) for r in self.rows],
            ["F1"] + [fmt(r.metrics.f1) for r in self.rows],
        ]
        widths = [max(len(row[c]) for row in [header] + lines) for c in range(len(header))]
        out = []
        if label:
            out.append(label)
        out.append("  ".join(f"{self.parameter_name:>{widths[0]}}" if c == 0 else " " * widths[c]
                             for c in range(len(header))).rstrip())
        out.append("  ".join(h.rjust(widths[c]) for c, h in enumerate(header)))
        for line in lines:
            out.append("  ".join(v.rjust(widths[c]) for c, v in enumerate(line)))
        return "\n".join(out)


def sweep(
    parameter_name: str,
    counts_by_value: Sequence[tuple[float, ConfusionCounts]],
) -> SweepTable:
    """Metrics table over a parameter grid evaluated against one truth."""
    rows = tuple(SweepRow(value, metrics(c), c) for value, c in counts_by_value)
    return SweepTable(parameter_name, rows)
