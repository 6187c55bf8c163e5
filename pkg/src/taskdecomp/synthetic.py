"""Synthetic problem-instance generator with planted ground truth.

Jobs are grouped into clusters.  Each cluster owns one monotone
frequency-to-share coefficient template and one automation probability;
task frequency rows are constructed so the planted coefficients reproduce
the planted shares exactly (two-bucket convex combinations).  Relatedness
edges are sampled only between jobs of the same cluster, so the planted
solution is mutually consistent: related jobs can share coefficients with
zero slack and related tasks can share probabilities with zero difference.

The planted values are returned alongside the dataset so tests can compare
recovered quantities against them.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .dataset import (
    NUM_BUCKETS,
    Dataset,
    FrequencyDistribution,
    Job,
    RelatednessGraph,
    Task,
)


@dataclass(frozen=True)
class GeneratorConfig:
    num_jobs: int = 100
    tasks_per_job: tuple[int, int] = (6, 14)
    num_clusters: int = 10
    # One automation probability per cluster; None spreads them over
    # [0.05, 0.95].  Length must equal num_clusters when given.
    cluster_probs: tuple[float, ...] | None = None
    # Probability that a cross-job task pair within a cluster gets an edge.
    relatedness_density: float = 0.05
    # Probability that a same-job task pair gets an edge (exercises the
    # task-level relation without inducing job relatedness).
    same_job_density: float = 0.0
    # Standard deviation of per-job jitter applied to the cluster probability.
    prob_jitter: float = 0.0
    # All jobs in a cluster get the same task count and share vector.
    identical_within_cluster: bool = False
    # Index of one job whose automation probability is flipped (p -> 1-p)
    # after its tasks were planted, creating a known outlier.
    flip_job_index: int | None = None

    def validate(self) -> None:
        if self.num_jobs < 1:
            raise ValueError("num_jobs must be >= 1")
        lo, hi = self.tasks_per_job
        if lo < 1 or hi < lo:
            raise ValueError(f"tasks_per_job range {self.tasks_per_job} is invalid")
        if not 1 <= self.num_clusters <= self.num_jobs:
            raise ValueError("num_clusters must be in [1, num_jobs]")
        if not 0.0 <= self.relatedness_density <= 1.0:
            raise ValueError("relatedness_density must be in [0, 1]")
        if not 0.0 <= self.same_job_density <= 1.0:
            raise ValueError("same_job_density must be in [0, 1]")
        if self.cluster_probs is not None:
            if len(self.cluster_probs) != self.num_clusters:
                raise ValueError("cluster_probs length must equal num_clusters")
            for q in self.cluster_probs:
                if not 0.0 <= q <= 1.0:
                    raise ValueError(f"cluster probability {q} outside [0, 1]")
        if self.flip_job_index is not None and not 0 <= self.flip_job_index < self.num_jobs:
            raise ValueError("flip_job_index out of range")


def two_cluster_config(num_jobs: int = 100) -> GeneratorConfig:
    """The planted two-cluster configuration with well-separated probabilities."""
    return GeneratorConfig(
        num_jobs=num_jobs,
        num_clusters=2,
        cluster_probs=(0.02, 0.98),
        relatedness_density=0.05,
    )


@dataclass(frozen=True)
class PlantedTruth:
    """Ground truth recorded alongside a generated dataset."""

    cluster_of_job: dict[str, int]
    cluster_probs: tuple[float, ...]
    coefficients: dict[str, tuple[float, ...]]  # job -> planted tau (7 values)
    shares: dict[str, float]                    # task -> planted share
    task_probs: dict[str, float]                # task -> planted probability
    job_probs: dict[str, float]                 # job -> pre-flip probability
    flipped_job: str | None

    def to_json_dict(self) -> dict:
        return {
            "cluster_of_job": dict(self.cluster_of_job),
            "cluster_probs": list(self.cluster_probs),
            "coefficients": {j: list(t) for j, t in self.coefficients.items()},
            "shares": dict(self.shares),
            "task_probs": dict(self.task_probs),
            "job_probs": dict(self.job_probs),
            "flipped_job": self.flipped_job,
        }


def save_truth(truth: PlantedTruth, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(truth.to_json_dict(), fh, indent=2, allow_nan=False)
        fh.write("\n")


def _planted_shares(rng: np.random.Generator, count: int) -> np.ndarray:
    """Positive shares summing to 1 exactly (last entry closes the sum)."""
    weights = rng.uniform(0.5, 1.5, size=count)
    shares = weights / weights.sum()
    shares[-1] = 1.0 - shares[:-1].sum()
    return shares


def _cluster_tau(rng: np.random.Generator, s_min: float, s_max: float) -> np.ndarray:
    """A monotone nondecreasing 7-vector whose range covers [s_min, s_max]."""
    increments = rng.uniform(0.2, 1.0, size=NUM_BUCKETS - 1)
    ladder = np.concatenate([[0.0], np.cumsum(increments)])
    ladder /= ladder[-1]
    lo = 0.5 * s_min
    hi = 1.05 * s_max
    return lo + ladder * (hi - lo)


def _freq_for_share(rng: np.random.Generator, tau: np.ndarray, share: float) -> tuple[float, ...]:
    """A frequency distribution f with tau . f == share.

    Uses a convex combination of two buckets whose coefficients bracket the
    target share, so the planted coefficients reproduce the planted share.
    """
    below = [i for i in range(NUM_BUCKETS) if tau[i] <= share]
    above = [i for i in range(NUM_BUCKETS) if tau[i] >= share]
    a = int(rng.choice(below))
    b = int(rng.choice(above))
    f = [0.0] * NUM_BUCKETS
    if tau[b] - tau[a] < 1e-15:
        f[a] = 1.0
    else:
        alpha = (tau[b] - share) / (tau[b] - tau[a])
        f[a] = alpha
        f[b] += 1.0 - alpha
    return tuple(f)


def generate_synthetic(config: GeneratorConfig, seed: int) -> tuple[Dataset, PlantedTruth]:
    """Deterministically generate a dataset plus its planted ground truth."""
    config.validate()
    rng = np.random.default_rng(seed)

    if config.cluster_probs is not None:
        cluster_probs = tuple(float(q) for q in config.cluster_probs)
    elif config.num_clusters == 1:
        cluster_probs = (0.5,)
    else:
        cluster_probs = tuple(
            float(q) for q in np.linspace(0.05, 0.95, config.num_clusters)
        )

    # Contiguous blocks of jobs per cluster.
    cluster_of: list[int] = [
        min(i * config.num_clusters // config.num_jobs, config.num_clusters - 1)
        for i in range(config.num_jobs)
    ]
    job_ids = [f"j{i:04d}" for i in range(config.num_jobs)]
    width = max(4, len(str(config.num_jobs * config.tasks_per_job[1])))

    jobs: dict[str, Job] = {}
    tasks: dict[str, Task] = {}
    truth_coeffs: dict[str, tuple[float, ...]] = {}
    truth_shares: dict[str, float] = {}
    truth_task_probs: dict[str, float] = {}
    truth_job_probs: dict[str, float] = {}
    cluster_of_job = {job_ids[i]: cluster_of[i] for i in range(config.num_jobs)}
    tasks_by_job: dict[str, list[str]] = {}

    task_counter = 0
    lo, hi = config.tasks_per_job
    for c in range(config.num_clusters):
        members = [i for i in range(config.num_jobs) if cluster_of[i] == c]
        if not members:
            continue
        if config.identical_within_cluster:
            count = int(rng.integers(lo, hi + 1))
            shared = _planted_shares(rng, count)
            share_vectors = {i: shared for i in members}
        else:
            share_vectors = {
                i: _planted_shares(rng, int(rng.integers(lo, hi + 1))) for i in members
            }
        s_min = min(float(v.min()) for v in share_vectors.values())
        s_max = max(float(v.max()) for v in share_vectors.values())
        tau = _cluster_tau(rng, s_min, s_max)
        shared_freqs = None
        if config.identical_within_cluster:
            shared_freqs = [_freq_for_share(rng, tau, float(s)) for s in share_vectors[members[0]]]

        for i in members:
            job_id = job_ids[i]
            prob = cluster_probs[c]
            if config.prob_jitter > 0.0:
                prob = float(np.clip(prob + rng.normal(0.0, config.prob_jitter), 0.0, 1.0))
            truth_job_probs[job_id] = prob
            truth_coeffs[job_id] = tuple(float(t) for t in tau)
            task_ids = []
            for k, share in enumerate(share_vectors[i]):
                task_id = f"t{task_counter:0{width}d}"
                task_counter += 1
                freq = (
                    shared_freqs[k]
                    if shared_freqs is not None
                    else _freq_for_share(rng, tau, float(share))
                )
                tasks[task_id] = Task(
                    task_id=task_id,
                    job_id=job_id,
                    description=f"synthetic task {task_id}",
                    freq=FrequencyDistribution(values=freq),
                )
                truth_shares[task_id] = float(share)
                truth_task_probs[task_id] = prob
                task_ids.append(task_id)
            tasks_by_job[job_id] = task_ids

            # Attributes: one strongly negative-monotone in the probability,
            # one mildly positive, one pure noise present on ~90% of jobs.
            attrs = {
                "cognition_level": float(
                    np.clip(round(1.0 + 6.0 * (1.0 - prob) + rng.normal(0.0, 0.3), 2), 1.0, 7.0)
                ),
                "manual_index": float(round(rng.uniform(1.0, 5.0), 2)),
            }
            if rng.random() < 0.9:
                attrs["automation_level"] = float(
                    np.clip(round(1.0 + 4.0 * prob + rng.normal(0.0, 1.0), 2), 1.0, 5.0)
                )
            jobs[job_id] = Job(
                job_id=job_id,
                title=f"synthetic job {i}",
                automation_prob=prob,
                attributes=attrs,
            )

    flipped_job = None
    if config.flip_job_index is not None:
        flipped_job = job_ids[config.flip_job_index]
        old = jobs[flipped_job]
        jobs[flipped_job] = Job(
            job_id=old.job_id,
            title=old.title,
            automation_prob=1.0 - old.automation_prob,
            attributes=old.attributes,
        )

    # Relatedness edges, sampled cluster by cluster in a fixed order.
    pairs: list[tuple[str, str]] = []
    for c in range(config.num_clusters):
        members = [job_ids[i] for i in range(config.num_jobs) if cluster_of[i] == c]
        for ai in range(len(members)):
            for bi in range(ai + 1, len(members)):
                ts_a = tasks_by_job[members[ai]]
                ts_b = tasks_by_job[members[bi]]
                mask = rng.random((len(ts_a), len(ts_b))) < config.relatedness_density
                for x in range(len(ts_a)):
                    for y in range(len(ts_b)):
                        if mask[x, y]:
                            pairs.append((ts_a[x], ts_b[y]))
        if config.same_job_density > 0.0:
            for job_id in members:
                ts = tasks_by_job[job_id]
                for x in range(len(ts)):
                    for y in range(x + 1, len(ts)):
                        if rng.random() < config.same_job_density:
                            pairs.append((ts[x], ts[y]))

    dataset = Dataset(
        jobs=jobs,
        tasks=tasks,
        graph=RelatednessGraph.build(pairs, list(tasks)),
    )
    truth = PlantedTruth(
        cluster_of_job=cluster_of_job,
        cluster_probs=cluster_probs,
        coefficients=truth_coeffs,
        shares=truth_shares,
        task_probs=truth_task_probs,
        job_probs=truth_job_probs,
        flipped_job=flipped_job,
    )
    return dataset, truth
