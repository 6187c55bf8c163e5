"""Frequency-to-share coefficients: the first linear program.

Each job gets seven coefficients tau_1..tau_7 converting its tasks'
frequency-bucket fractions into time shares, constrained monotone
nondecreasing with tau_1 >= 0.  For every related job pair and bucket, a
slack variable is forced above the coefficient difference in both
directions; minimizing the total slack makes related jobs' coefficients as
similar as the per-job share-sum band allows.  At the optimum each slack
equals the absolute coefficient difference of its pair and bucket.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

from . import lp_core
from .dataset import NUM_BUCKETS, Dataset, derive_job_relatedness
from .lp_core import LpProblem, solve

# Default width of the per-job share-sum band [1 - eps, 1 + eps].
DEFAULT_EPSILON = 0.01

MONOTONE_TOL = 1e-9
SLACK_TIGHT_TOL = 1e-7


def _tau_name(job_id: str, bucket: int) -> str:
    return f"tau[{job_id}][{bucket}]"


def _delta_name(job_a: str, job_b: str, bucket: int) -> str:
    return f"delta[{job_a}|{job_b}][{bucket}]"


def related_job_pairs(dataset: Dataset) -> list[tuple[str, str]]:
    """Related job pairs in deterministic (job declaration) order."""
    order = {job_id: i for i, job_id in enumerate(dataset.jobs)}
    pairs = derive_job_relatedness(dataset)
    return sorted(pairs, key=lambda p: (order[p[0]], order[p[1]]))


def build_share_lp(dataset: Dataset, epsilon: float = DEFAULT_EPSILON) -> LpProblem:
    """Assemble the coefficient LP.

    Variables: 7 free tau per job, 7 nonnegative slack per related job pair
    (objective coefficient 1).  Constraints, in order: two slack-definition
    inequalities per pair and bucket, the two share-sum band rows per job,
    tau_1 >= 0 per job, and six monotonicity rows per job.
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must be in (0, 1), got {epsilon}")
    problem = LpProblem(name="share-lp")
    tau: dict[str, list[int]] = {}
    for job_id in dataset.jobs:
        tau[job_id] = [
            problem.add_variable(_tau_name(job_id, b), lower=-math.inf, upper=math.inf)
            for b in range(1, NUM_BUCKETS + 1)
        ]
    pairs = related_job_pairs(dataset)
    delta: dict[tuple[str, str], list[int]] = {}
    for a, b in pairs:
        delta[(a, b)] = [
            problem.add_variable(_delta_name(a, b, k), lower=0.0, upper=math.inf, objective=1.0)
            for k in range(1, NUM_BUCKETS + 1)
        ]

    for a, b in pairs:
        for k in range(NUM_BUCKETS):
            d = delta[(a, b)][k]
            ta = tau[a][k]
            tb = tau[b][k]
            problem.add_constraint([(ta, 1.0), (tb, -1.0), (d, -1.0)], "<=", 0.0)
            problem.add_constraint([(tb, 1.0), (ta, -1.0), (d, -1.0)], "<=", 0.0)

    # Per-job aggregate frequency mass per bucket drives the band rows.
    bucket_mass: dict[str, list[float]] = {job_id: [0.0] * NUM_BUCKETS for job_id in dataset.jobs}
    for task in dataset.tasks.values():
        mass = bucket_mass[task.job_id]
        for k, f in enumerate(task.freq.values):
            mass[k] += f
    for job_id in dataset.jobs:
        row = [(tau[job_id][k], bucket_mass[job_id][k]) for k in range(NUM_BUCKETS)]
        problem.add_constraint(row, "<=", 1.0 + epsilon)
        problem.add_constraint(row, ">=", 1.0 - epsilon)
    for job_id in dataset.jobs:
        problem.add_constraint([(tau[job_id][0], 1.0)], ">=", 0.0)
    for job_id in dataset.jobs:
        for k in range(1, NUM_BUCKETS):
            problem.add_constraint(
                [(tau[job_id][k], 1.0), (tau[job_id][k - 1], -1.0)], ">=", 0.0
            )
    return problem


@dataclass(frozen=True)
class ShareCoefficients:
    """Optimal per-job coefficients plus the pairwise slack they incurred."""

    tau: dict[str, tuple[float, ...]]
    delta: dict[tuple[str, str], tuple[float, ...]]
    objective: float
    mean_delta: float | None
    epsilon: float
    # Jobs with no related partner: their coefficients are pinned only by
    # their own band and monotonicity rows, so the solver picks one of many
    # optimal vertices.
    unconstrained_jobs: tuple[str, ...]
    num_variables: int
    num_constraints: int


def solve_shares(dataset: Dataset, epsilon: float = DEFAULT_EPSILON) -> ShareCoefficients:
    """Build and solve the coefficient LP, verifying the solution contract."""
    problem = build_share_lp(dataset, epsilon)
    solution = solve(problem)
    if solution.status != "optimal":
        raise lp_core.SolverBreakdownError(
            f"share-lp: expected an optimum, solver reported {solution.status}"
        )
    pairs = related_job_pairs(dataset)
    tau = {
        job_id: tuple(
            solution.value(_tau_name(job_id, b)) for b in range(1, NUM_BUCKETS + 1)
        )
        for job_id in dataset.jobs
    }
    delta = {
        (a, b): tuple(
            solution.value(_delta_name(a, b, k)) for k in range(1, NUM_BUCKETS + 1)
        )
        for a, b in pairs
    }
    _check_coefficients(tau, delta, epsilon)
    related = {j for pair in pairs for j in pair}
    unconstrained = tuple(j for j in dataset.jobs if j not in related)
    num_deltas = NUM_BUCKETS * len(pairs)
    return ShareCoefficients(
        tau=tau,
        delta=delta,
        objective=solution.objective,
        mean_delta=(solution.objective / num_deltas) if num_deltas else None,
        epsilon=epsilon,
        unconstrained_jobs=unconstrained,
        num_variables=problem.num_variables,
        num_constraints=problem.num_constraints,
    )


def _check_coefficients(tau, delta, epsilon) -> None:
    for job_id, coeffs in tau.items():
        if coeffs[0] < -MONOTONE_TOL:
            raise lp_core.SolverBreakdownError(
                f"share-lp: tau1 of job {job_id!r} is negative: {coeffs[0]}"
            )
        for k in range(1, NUM_BUCKETS):
            if coeffs[k] < coeffs[k - 1] - MONOTONE_TOL:
                raise lp_core.SolverBreakdownError(
                    f"share-lp: coefficients of job {job_id!r} not monotone at bucket {k + 1}"
                )
    for (a, b), ds in delta.items():
        for k in range(NUM_BUCKETS):
            gap = abs(ds[k] - abs(tau[a][k] - tau[b][k]))
            if gap > SLACK_TIGHT_TOL:
                raise lp_core.SolverBreakdownError(
                    f"share-lp: slack not tight for pair ({a!r}, {b!r}) bucket {k + 1}: {gap}"
                )


@dataclass(frozen=True)
class TaskShareTable:
    """Per-task time shares derived from the coefficients.

    ``raw`` is the coefficient-weighted frequency sum; ``normalized``
    rescales each job's shares to sum to exactly 1.  ``use_normalized``
    selects which of the two downstream consumers see.
    """

    raw: dict[str, float]
    normalized: dict[str, float]
    job_raw_sum: dict[str, float]
    job_of: dict[str, str]
    use_normalized: bool

    def share(self, task_id: str) -> float:
        return self.normalized[task_id] if self.use_normalized else self.raw[task_id]

    @property
    def shares(self) -> dict[str, float]:
        return self.normalized if self.use_normalized else self.raw


def compute_shares(
    coeffs: ShareCoefficients, dataset: Dataset, normalize: bool = True
) -> TaskShareTable:
    """Apply the coefficients to every task's frequency distribution."""
    raw: dict[str, float] = {}
    job_raw_sum: dict[str, float] = {job_id: 0.0 for job_id in dataset.jobs}
    job_of: dict[str, str] = {}
    for task in dataset.tasks.values():
        if task.job_id not in coeffs.tau:
            raise ValueError(f"job {task.job_id!r} has no coefficients")
        tau = coeffs.tau[task.job_id]
        s = sum(t * f for t, f in zip(tau, task.freq.values))
        raw[task.task_id] = s
        job_raw_sum[task.job_id] += s
        job_of[task.task_id] = task.job_id
    normalized = {
        task_id: s / job_raw_sum[job_of[task_id]] for task_id, s in raw.items()
    }
    return TaskShareTable(
        raw=raw,
        normalized=normalized,
        job_raw_sum=job_raw_sum,
        job_of=job_of,
        use_normalized=normalize,
    )


def uniform_shares(dataset: Dataset) -> TaskShareTable:
    """Debug alternative: every task gets 1/(task count of its job)."""
    counts: dict[str, int] = {}
    for task in dataset.tasks.values():
        counts[task.job_id] = counts.get(task.job_id, 0) + 1
    raw = {t.task_id: 1.0 / counts[t.job_id] for t in dataset.tasks.values()}
    return TaskShareTable(
        raw=raw,
        normalized=dict(raw),
        job_raw_sum={j: 1.0 for j in dataset.jobs},
        job_of={t.task_id: t.job_id for t in dataset.tasks.values()},
        use_normalized=True,
    )


# ---------------------------------------------------------------------------
# Output files
# ---------------------------------------------------------------------------


def _fmt(x: float) -> str:
    return repr(float(x))


def write_coefficients_csv(coeffs: ShareCoefficients, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("job_id",) + tuple(f"tau{b}" for b in range(1, NUM_BUCKETS + 1)))
        for job_id, tau in coeffs.tau.items():
            w.writerow((job_id,) + tuple(_fmt(t) for t in tau))


def write_shares_csv(table: TaskShareTable, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("task_id", "job_id", "share_raw", "share_normalized"))
        for task_id in table.raw:
            w.writerow(
                (
                    task_id,
                    table.job_of[task_id],
                    _fmt(table.raw[task_id]),
                    _fmt(table.normalized[task_id]),
                )
            )


def read_shares_csv(path, use_normalized: bool = True) -> TaskShareTable:
    raw: dict[str, float] = {}
    normalized: dict[str, float] = {}
    job_of: dict[str, str] = {}
    job_raw_sum: dict[str, float] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            task_id = row["task_id"]
            raw[task_id] = float(row["share_raw"])
            normalized[task_id] = float(row["share_normalized"])
            job_of[task_id] = row["job_id"]
            job_raw_sum[row["job_id"]] = job_raw_sum.get(row["job_id"], 0.0) + raw[task_id]
    return TaskShareTable(
        raw=raw,
        normalized=normalized,
        job_raw_sum=job_raw_sum,
        job_of=job_of,
        use_normalized=use_normalized,
    )


def write_share_summary(coeffs: ShareCoefficients, path) -> None:
    summary = {
        "objective": coeffs.objective,
        "mean_delta": coeffs.mean_delta,
        "epsilon": coeffs.epsilon,
        "num_variables": coeffs.num_variables,
        "num_constraints": coeffs.num_constraints,
        "num_pair_slack_variables": NUM_BUCKETS * len(coeffs.delta),
        "unconstrained_by_relations": list(coeffs.unconstrained_jobs),
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(summary, fh, indent=2, allow_nan=False)
        fh.write("\n")
