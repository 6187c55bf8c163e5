"""Task automation probabilities: the second linear program.

One probability variable per task, box-bounded to [0, 1].  For every
related task pair a difference variable (also in [0, 1]) is forced above
the probability gap in both directions and summed in the objective; per
job, the share-weighted probability mean must stay within the
multiplicative band around the job's own automation probability.
Minimizing the summed differences pushes related tasks toward equal
probabilities, and the optima tend to polarize: most tasks end up at 0
or 1.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

from . import lp_core
from .analysis import Histogram, make_histogram
from .dataset import Dataset, RelatednessGraph
from .lp_core import LpProblem, solve
from .share_model import DEFAULT_EPSILON, TaskShareTable

BAND_TOL = 1e-7
DIFF_TIGHT_TOL = 1e-7


def _p_name(task_id: str) -> str:
    return f"p[{task_id}]"


def _diff_name(task_a: str, task_b: str) -> str:
    return f"D[{task_a}|{task_b}]"


def ordered_edges(dataset: Dataset) -> list[tuple[str, str]]:
    """Graph edges in deterministic (task declaration) order."""
    order = {task_id: i for i, task_id in enumerate(dataset.tasks)}
    return sorted(
        ((a, b) if order[a] < order[b] else (b, a) for a, b in dataset.graph.edges),
        key=lambda e: (order[e[0]], order[e[1]]),
    )


def build_prob_lp(
    dataset: Dataset, shares: TaskShareTable, epsilon: float = DEFAULT_EPSILON
) -> LpProblem:
    """Assemble the probability LP.

    Variables: one p per task in [0, 1]; one difference variable per related
    task pair in [0, 1] with objective coefficient 1.  Constraints, in
    order: two difference-definition inequalities per pair, then the two
    band rows per job.
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must be in (0, 1), got {epsilon}")
    problem = LpProblem(name="prob-lp")
    p: dict[str, int] = {}
    for task_id in dataset.tasks:
        if task_id not in shares.shares:
            raise ValueError(f"task {task_id!r} has no share")
        p[task_id] = problem.add_variable(_p_name(task_id), lower=0.0, upper=1.0)
    edges = ordered_edges(dataset)
    for a, b in edges:
        d = problem.add_variable(_diff_name(a, b), lower=0.0, upper=1.0, objective=1.0)
        problem.add_constraint([(p[a], 1.0), (p[b], -1.0), (d, -1.0)], "<=", 0.0)
        problem.add_constraint([(p[b], 1.0), (p[a], -1.0), (d, -1.0)], "<=", 0.0)
    tasks_by_job: dict[str, list[str]] = {job_id: [] for job_id in dataset.jobs}
    for task in dataset.tasks.values():
        tasks_by_job[task.job_id].append(task.task_id)
    for job_id, job in dataset.jobs.items():
        row = [(p[t], shares.share(t)) for t in tasks_by_job[job_id]]
        problem.add_constraint(row, "<=", job.automation_prob * (1.0 + epsilon))
        problem.add_constraint(row, ">=", job.automation_prob * (1.0 - epsilon))
    return problem


@dataclass(frozen=True)
class TaskProbabilities:
    """Optimal per-task probabilities plus run metadata."""

    probs: dict[str, float]
    pair_delta: dict[tuple[str, str], float]
    objective: float
    epsilon: float
    # Tasks with no pairwise term: their value is pinned only by the job
    # band, so individual figures should be read with care.
    unanchored_tasks: tuple[str, ...]
    num_variables: int
    num_constraints: int

    @property
    def mean_pair_diff(self) -> float | None:
        if not self.pair_delta:
            return None
        return self.objective / len(self.pair_delta)


def baseline_objective(dataset: Dataset) -> float:
    """Objective of the always-feasible point p(t) = p(job of t).

    Same-job pairs contribute zero there, so this is the sum of job
    probability gaps over related cross-job task pairs; the optimum can
    never exceed it.
    """
    total = 0.0
    for a, b in sorted(dataset.graph.edges):
        pa = dataset.jobs[dataset.tasks[a].job_id].automation_prob
        pb = dataset.jobs[dataset.tasks[b].job_id].automation_prob
        total += abs(pa - pb)
    return total


def solve_task_probs(
    dataset: Dataset, shares: TaskShareTable, epsilon: float = DEFAULT_EPSILON
) -> TaskProbabilities:
    """Build and solve the probability LP, verifying the solution contract."""
    problem = build_prob_lp(dataset, shares, epsilon)
    solution = solve(problem)
    if solution.status != "optimal":
        raise lp_core.SolverBreakdownError(
            f"prob-lp: expected an optimum, solver reported {solution.status}"
        )
    edges = ordered_edges(dataset)
    probs = {task_id: solution.value(_p_name(task_id)) for task_id in dataset.tasks}
    pair_delta = {(a, b): solution.value(_diff_name(a, b)) for a, b in edges}
    anchored = {t for e in edges for t in e}
    unanchored = tuple(t for t in dataset.tasks if t not in anchored)
    result = TaskProbabilities(
        probs=probs,
        pair_delta=pair_delta,
        objective=solution.objective,
        epsilon=epsilon,
        unanchored_tasks=unanchored,
        num_variables=problem.num_variables,
        num_constraints=problem.num_constraints,
    )
    _check_probs(dataset, shares, result)
    return result


def _check_probs(dataset: Dataset, shares: TaskShareTable, result: TaskProbabilities) -> None:
    for task_id, value in result.probs.items():
        if not 0.0 <= value <= 1.0:
            raise lp_core.SolverBreakdownError(
                f"prob-lp: probability of task {task_id!r} outside [0, 1]: {value}"
            )
    means: dict[str, float] = {job_id: 0.0 for job_id in dataset.jobs}
    for task in dataset.tasks.values():
        means[task.job_id] += result.probs[task.task_id] * shares.share(task.task_id)
    for job_id, job in dataset.jobs.items():
        lo = job.automation_prob * (1.0 - result.epsilon)
        hi = job.automation_prob * (1.0 + result.epsilon)
        if means[job_id] < lo - BAND_TOL or means[job_id] > hi + BAND_TOL:
            raise lp_core.SolverBreakdownError(
                f"prob-lp: weighted mean {means[job_id]} of job {job_id!r} "
                f"outside [{lo}, {hi}]"
            )
    for (a, b), d in result.pair_delta.items():
        gap = abs(d - abs(result.probs[a] - result.probs[b]))
        if gap > DIFF_TIGHT_TOL:
            raise lp_core.SolverBreakdownError(
                f"prob-lp: difference variable not tight for pair ({a!r}, {b!r}): {gap}"
            )
    base = baseline_objective(dataset)
    if result.objective > base + 1e-9 * max(1.0, base):
        raise lp_core.SolverBreakdownError(
            f"prob-lp: objective {result.objective} exceeds the equal-to-job "
            f"baseline {base}"
        )


def pair_diff_distribution(
    probs: TaskProbabilities, graph: RelatednessGraph, bins: int = 50
) -> Histogram:
    """Histogram of |p(a) - p(b)| over related task pairs."""
    values = [abs(probs.probs[a] - probs.probs[b]) for a, b in sorted(graph.edges)]
    return make_histogram(values, (0.0, 1.0), bins)


# ---------------------------------------------------------------------------
# Output files
# ---------------------------------------------------------------------------


def _fmt(x: float) -> str:
    return repr(float(x))


def write_task_probs_csv(
    result: TaskProbabilities, shares: TaskShareTable, path
) -> None:
    unanchored = set(result.unanchored_tasks)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("task_id", "job_id", "share", "probability", "anchored"))
        for task_id, value in result.probs.items():
            w.writerow(
                (
                    task_id,
                    shares.job_of[task_id],
                    _fmt(shares.share(task_id)),
                    _fmt(value),
                    "0" if task_id in unanchored else "1",
                )
            )


def read_task_probs_csv(path, epsilon: float = DEFAULT_EPSILON) -> TaskProbabilities:
    """Reload a stage output; pair differences are not stored in the CSV."""
    probs: dict[str, float] = {}
    unanchored: list[str] = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            probs[row["task_id"]] = float(row["probability"])
            if row["anchored"] == "0":
                unanchored.append(row["task_id"])
    return TaskProbabilities(
        probs=probs,
        pair_delta={},
        objective=math.nan,
        epsilon=epsilon,
        unanchored_tasks=tuple(unanchored),
        num_variables=0,
        num_constraints=0,
    )


def write_pair_diffs_csv(result: TaskProbabilities, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("task_id_a", "task_id_b", "diff"))
        for (a, b), d in sorted(result.pair_delta.items()):
            w.writerow((a, b, _fmt(d)))


def write_prob_summary(result: TaskProbabilities, path) -> None:
    summary = {
        "objective": result.objective,
        "epsilon": result.epsilon,
        "num_variables": result.num_variables,
        "num_constraints": result.num_constraints,
        "num_pair_variables": len(result.pair_delta),
        "mean_pair_diff": result.mean_pair_diff,
        "unanchored_tasks": len(result.unanchored_tasks),
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(summary, fh, indent=2, allow_nan=False)
        fh.write("\n")
