"""Descriptive statistics over pipeline outputs: histograms, scatter data,
and correlations, emitted as structured plot data (CSV/JSON) rather than
rendered figures.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, Sequence

import numpy as np

if TYPE_CHECKING:
    from .dataset import Dataset
    from .prob_model import TaskProbabilities
    from .share_model import TaskShareTable


@dataclass(frozen=True)
class Histogram:
    """Counts over uniform bins of a declared range.

    Out-of-range values are clamped into the edge bins and tallied in
    ``clamped`` so totals always conserve the input count.  ``mean`` and
    ``mean_abs`` are None for empty inputs.
    """

    lo: float
    hi: float
    edges: tuple[float, ...]
    counts: tuple[int, ...]
    total: int
    mean: float | None
    mean_abs: float | None
    clamped: int

    def to_json_dict(self) -> dict:
        return {
            "lo": self.lo,
            "hi": self.hi,
            "edges": list(self.edges),
            "counts": list(self.counts),
            "total": self.total,
            "mean": self.mean,
            "mean_abs": self.mean_abs,
            "clamped": self.clamped,
        }


def make_histogram(values: Iterable[float], range: tuple[float, float], bins: int) -> Histogram:
    lo, hi = float(range[0]), float(range[1])
    if bins < 1:
        raise ValueError("bins must be >= 1")
    if not lo < hi:
        raise ValueError(f"histogram range is empty: ({lo}, {hi})")
    vals = np.asarray(list(values), dtype=float)
    edges = tuple(float(e) for e in np.linspace(lo, hi, bins + 1))
    counts = [0] * bins
    clamped = 0
    width = (hi - lo) / bins
    for v in vals:
        if v < lo or v > hi:
            clamped += 1
        k = int((min(max(v, lo), hi) - lo) / width)
        counts[min(k, bins - 1)] += 1
    return Histogram(
        lo=lo,
        hi=hi,
        edges=edges,
        counts=tuple(counts),
        total=int(len(vals)),
        mean=float(vals.mean()) if len(vals) else None,
        mean_abs=float(np.abs(vals).mean()) if len(vals) else None,
        clamped=clamped,
    )


def pearson(xs: Sequence[float], ys: Sequence[float]) -> float | None:
    """Sample Pearson correlation; None when either variance is zero."""
    if len(xs) != len(ys):
        raise ValueError("input lengths differ")
    if len(xs) < 2:
        raise ValueError("need at least two points")
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        return None
    r = float((dx @ dy) / math.sqrt(sxx * syy))
    return min(1.0, max(-1.0, r))


def _ranks(values: Sequence[float]) -> np.ndarray:
    """Average ranks (ties share the mean of their positions)."""
    arr = np.asarray(values, dtype=float)
    order = np.argsort(arr, kind="stable")
    ranks = np.empty(len(arr), dtype=float)
    i = 0
    while i < len(arr):
        j = i
        while j + 1 < len(arr) and arr[order[j + 1]] == arr[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def spearman(xs: Sequence[float], ys: Sequence[float]) -> float | None:
    """Rank correlation, provided for sensitivity checks on ordinal scales."""
    if len(xs) != len(ys):
        raise ValueError("input lengths differ")
    if len(xs) < 2:
        raise ValueError("need at least two points")
    return pearson(_ranks(xs), _ranks(ys))


_ESTIMATORS = {"pearson": pearson, "spearman": spearman}


@dataclass(frozen=True)
class ScatterSeries:
    """Plot-ready (x, y) points with entity ids and their correlation."""

    points: tuple[tuple[str, float, float], ...]
    r: float | None
    n: int
    skipped: int = 0
    method: str = "pearson"


def _series(points, skipped, method) -> ScatterSeries:
    xs = [p[1] for p in points]
    ys = [p[2] for p in points]
    r = _ESTIMATORS[method](xs, ys) if len(points) >= 2 else None
    return ScatterSeries(
        points=tuple(points), r=r, n=len(points), skipped=skipped, method=method
    )


def share_vs_probability(
    shares: "TaskShareTable", probs: "TaskProbabilities", method: str = "pearson"
) -> ScatterSeries:
    """One point per task: its time share against its probability."""
    points = [
        (task_id, shares.share(task_id), probs.probs[task_id])
        for task_id in shares.shares
    ]
    return _series(points, 0, method)


def attribute_vs_probability(
    dataset: "Dataset", attribute: str, method: str = "pearson"
) -> ScatterSeries:
    """One point per job carrying the attribute: level against job probability.

    Jobs missing the attribute are skipped and counted; an attribute carried
    by fewer than two jobs is an error.
    """
    points = []
    skipped = 0
    for job in dataset.jobs.values():
        if attribute in job.attributes:
            points.append((job.job_id, job.attributes[attribute], job.automation_prob))
        else:
            skipped += 1
    if len(points) < 2:
        raise ValueError(
            f"attribute {attribute!r} is carried by {len(points)} job(s); need at least 2"
        )
    return _series(points, skipped, method)


def all_attributes(dataset: "Dataset") -> list[str]:
    names = {name for job in dataset.jobs.values() for name in job.attributes}
    return sorted(names)


# ---------------------------------------------------------------------------
# Plot-data files
# ---------------------------------------------------------------------------


def _fmt(x: float) -> str:
    return repr(float(x))


def write_scatter_csv(series: ScatterSeries, path, x_label: str, y_label: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("id", x_label, y_label))
        for entity, x, y in series.points:
            w.writerow((entity, _fmt(x), _fmt(y)))


def write_histogram_csv(hist: Histogram, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("bin_lo", "bin_hi", "count"))
        for k, count in enumerate(hist.counts):
            w.writerow((_fmt(hist.edges[k]), _fmt(hist.edges[k + 1]), count))


def write_analysis_summary(summary: dict, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(summary, fh, indent=2, allow_nan=False)
        fh.write("\n")
