"""Leave-one-out cross-validation of the probability assignment.

For every job, the probability LP is re-solved on the dataset with that job
removed.  Each of the held-out job's tasks is then predicted as the plain
average of its surviving related tasks' probabilities, and the job's
probability is reconstructed as the share-weighted mean of those
predictions (shares renormalized over the tasks that have at least one
surviving neighbor).  Jobs whose reconstructed probability disagrees with
the original beyond configurable thresholds are flagged for review.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple

from .analysis import Histogram, make_histogram
from .dataset import Dataset, RelatednessGraph
from .prob_model import TaskProbabilities, solve_task_probs
from .share_model import DEFAULT_EPSILON, TaskShareTable

# |p - p'| above the first threshold flags a strong outlier, above the
# second a job worth review; both are CLI-configurable.
DEFAULT_STRONG_THRESHOLD = 0.5
DEFAULT_REVIEW_THRESHOLD = 0.2

TIER_STRONG = "strong outlier"
TIER_REVIEW = "review"
TIER_CONSISTENT = "consistent"
TIER_UNRECONSTRUCTABLE = "unreconstructable"


def leave_one_out_solve(
    dataset: Dataset,
    shares: TaskShareTable,
    epsilon: float,
    excluded_job: str,
) -> TaskProbabilities:
    """Solve the probability LP without one job.

    The excluded job's tasks, band rows, and every pair term touching its
    tasks are gone; shares of the remaining tasks are unchanged (they are
    normalized per job).
    """
    if excluded_job not in dataset.jobs:
        raise KeyError(excluded_job)
    return solve_task_probs(dataset.without_job(excluded_job), shares, epsilon)


def neighbor_average(
    excluded_job: str,
    loo_solution: TaskProbabilities,
    graph: RelatednessGraph,
) -> dict[str, float | None]:
    """Predicted probability per held-out task: mean over surviving neighbors.

    The graph's adjacency covers every task of the full dataset, so the
    held-out tasks are exactly those missing from the leave-one-out
    solution.  Tasks whose neighbors were all held out too (or that had
    none) map to None.
    """
    held_out = [t for t in graph.adjacency if t not in loo_solution.probs]
    result: dict[str, float | None] = {}
    for t in held_out:
        neighbors = [n for n in sorted(graph.adjacency[t]) if n in loo_solution.probs]
        if neighbors:
            result[t] = sum(loo_solution.probs[n] for n in neighbors) / len(neighbors)
        else:
            result[t] = None
    return result


class Reconstruction(NamedTuple):
    value: float | None  # None when no task had a defined prediction
    coverage: float      # share mass of tasks with defined predictions


def reconstruct_job(
    p_prime: dict[str, float | None],
    shares: TaskShareTable,
    job: str,
) -> Reconstruction:
    """Share-weighted mean of the defined predictions, renormalized over them."""
    defined = [
        (t, v) for t, v in p_prime.items() if v is not None and shares.job_of.get(t) == job
    ]
    coverage = sum(shares.share(t) for t, _ in defined)
    if not defined or coverage <= 0.0:
        return Reconstruction(value=None, coverage=0.0)
    value = sum(v * shares.share(t) for t, v in defined) / coverage
    return Reconstruction(value=value, coverage=coverage)


@dataclass(frozen=True)
class JobRow:
    job_id: str
    p: float
    p_prime: float | None
    delta: float | None
    coverage: float
    tier: str


@dataclass(frozen=True)
class TaskRow:
    task_id: str
    job_id: str
    p: float
    p_prime: float | None
    neighbors: int


@dataclass(frozen=True)
class CrossvalReport:
    jobs: tuple[JobRow, ...]
    tasks: tuple[TaskRow, ...]
    task_delta_hist: Histogram  # p(t) - p'(t) over tasks with defined p'
    job_delta_hist: Histogram   # p(j) - p'(j) over reconstructable jobs
    unreconstructable: tuple[str, ...]
    strong_threshold: float
    review_threshold: float

    def tier_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for row in self.jobs:
            counts[row.tier] = counts.get(row.tier, 0) + 1
        return counts


def _tier(delta: float | None, strong: float, review: float) -> str:
    if delta is None:
        return TIER_UNRECONSTRUCTABLE
    if abs(delta) > strong:
        return TIER_STRONG
    if abs(delta) > review:
        return TIER_REVIEW
    return TIER_CONSISTENT


_WORKER_STATE: dict = {}


def _loo_worker_init(dataset: Dataset, shares: TaskShareTable, epsilon: float) -> None:
    _WORKER_STATE["args"] = (dataset, shares, epsilon)


def _loo_worker(job_id: str) -> tuple[str, dict[str, float]]:
    dataset, shares, epsilon = _WORKER_STATE["args"]
    solution = leave_one_out_solve(dataset, shares, epsilon, job_id)
    return job_id, solution.probs


def run_crossval(
    dataset: Dataset,
    shares: TaskShareTable,
    epsilon: float = DEFAULT_EPSILON,
    *,
    full_solution: TaskProbabilities | None = None,
    strong_threshold: float = DEFAULT_STRONG_THRESHOLD,
    review_threshold: float = DEFAULT_REVIEW_THRESHOLD,
    bins: int = 50,
    parallelism: int = 1,
) -> CrossvalReport:
    """Full leave-one-out sweep over all jobs.

    The per-job solves are independent; ``parallelism`` > 1 runs them in a
    process pool.  The report is aggregated in job declaration order either
    way, so the output does not depend on scheduling.
    """
    if strong_threshold < review_threshold:
        raise ValueError("strong threshold must be >= review threshold")
    if full_solution is None:
        full_solution = solve_task_probs(dataset, shares, epsilon)

    job_ids = list(dataset.jobs)
    loo_probs: dict[str, dict[str, float]] = {}
    if parallelism > 1 and len(job_ids) > 1:
        with ProcessPoolExecutor(
            max_workers=parallelism,
            initializer=_loo_worker_init,
            initargs=(dataset, shares, epsilon),
        ) as pool:
            for job_id, probs in pool.map(_loo_worker, job_ids):
                loo_probs[job_id] = probs
    else:
        for job_id in job_ids:
            loo_probs[job_id] = leave_one_out_solve(dataset, shares, epsilon, job_id).probs

    job_rows: list[JobRow] = []
    task_rows: list[TaskRow] = []
    task_deltas: list[float] = []
    job_deltas: list[float] = []
    unreconstructable: list[str] = []
    for job_id in job_ids:
        probs = loo_probs[job_id]
        p_prime: dict[str, float | None] = {}
        for t in dataset.task_ids_of(job_id):
            neighbors = [n for n in sorted(dataset.graph.adjacency[t]) if n in probs]
            p_prime[t] = (
                sum(probs[n] for n in neighbors) / len(neighbors) if neighbors else None
            )
            task_rows.append(
                TaskRow(
                    task_id=t,
                    job_id=job_id,
                    p=full_solution.probs[t],
                    p_prime=p_prime[t],
                    neighbors=len(neighbors),
                )
            )
            if p_prime[t] is not None:
                task_deltas.append(full_solution.probs[t] - p_prime[t])
        rec = reconstruct_job(p_prime, shares, job_id)
        p_job = dataset.jobs[job_id].automation_prob
        delta = (p_job - rec.value) if rec.value is not None else None
        tier = _tier(delta, strong_threshold, review_threshold)
        if rec.value is None:
            unreconstructable.append(job_id)
        else:
            job_deltas.append(delta)
        job_rows.append(
            JobRow(
                job_id=job_id,
                p=p_job,
                p_prime=rec.value,
                delta=delta,
                coverage=rec.coverage,
                tier=tier,
            )
        )

    return CrossvalReport(
        jobs=tuple(job_rows),
        tasks=tuple(task_rows),
        task_delta_hist=make_histogram(task_deltas, (-1.0, 1.0), bins),
        job_delta_hist=make_histogram(job_deltas, (-1.0, 1.0), bins),
        unreconstructable=tuple(unreconstructable),
        strong_threshold=strong_threshold,
        review_threshold=review_threshold,
    )


# ---------------------------------------------------------------------------
# Output files
# ---------------------------------------------------------------------------


def _fmt(x: float | None) -> str:
    return "" if x is None else repr(float(x))


def write_crossval_jobs_csv(report: CrossvalReport, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("job_id", "p", "p_prime", "delta", "coverage", "tier"))
        for row in report.jobs:
            w.writerow(
                (
                    row.job_id,
                    _fmt(row.p),
                    _fmt(row.p_prime),
                    _fmt(row.delta),
                    _fmt(row.coverage),
                    row.tier,
                )
            )


def write_crossval_tasks_csv(report: CrossvalReport, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("task_id", "p", "p_prime", "neighbors"))
        for row in report.tasks:
            w.writerow((row.task_id, _fmt(row.p), _fmt(row.p_prime), row.neighbors))


def write_crossval_histograms(report: CrossvalReport, path) -> None:
    doc = {
        "task_delta": report.task_delta_hist.to_json_dict(),
        "job_delta": report.job_delta_hist.to_json_dict(),
        "strong_threshold": report.strong_threshold,
        "review_threshold": report.review_threshold,
        "tier_counts": report.tier_counts(),
        "unreconstructable": list(report.unreconstructable),
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2, allow_nan=False)
        fh.write("\n")
