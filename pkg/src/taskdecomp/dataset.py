"""Problem-instance model and ingestion.

A dataset is a set of jobs, each carrying an automation probability and at
least one task; each task carries a 7-bucket performance-frequency
distribution; an undirected relatedness graph connects similar tasks.  Two
jobs are related iff they own related tasks (transitivity is *not* implied).

CSV schemas (UTF-8, header row, comma delimiter, `.` decimal point):

    jobs.csv:       job_id,title,automation_prob
    tasks.csv:      task_id,job_id,description,f1,f2,f3,f4,f5,f6,f7
    related.csv:    task_id_a,task_id_b
    attributes.csv: job_id,attribute,value

A JSON mirror of the whole dataset (one document, same field names) is
accepted and emitted interchangeably.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

NUM_BUCKETS = 7

# Frequency rows are survey percentages and rarely sum to exactly 1; within
# this band the row is rescaled, beyond it the row is treated as corrupt.
FREQ_RENORM_BAND = 0.02

FREQ_COLUMNS = tuple(f"f{i}" for i in range(1, NUM_BUCKETS + 1))


class DatasetError(ValueError):
    """Invalid input data.  Carries one message per violation found."""

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


@dataclass(frozen=True)
class FrequencyDistribution:
    """Fractions of the seven performance-frequency buckets, summing to 1."""

    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.values) != NUM_BUCKETS:
            raise DatasetError(f"frequency distribution needs {NUM_BUCKETS} values")

    @classmethod
    def from_raw(cls, raw, where: str = "frequency row") -> "FrequencyDistribution":
        """Validate and renormalize a raw frequency row.

        Each entry must lie in [0, 1]; the sum must be within
        FREQ_RENORM_BAND of 1 and is rescaled to exactly 1.
        """
        vals = [float(v) for v in raw]
        if len(vals) != NUM_BUCKETS:
            raise DatasetError(f"{where}: expected {NUM_BUCKETS} frequencies, got {len(vals)}")
        for i, v in enumerate(vals):
            if not math.isfinite(v) or v < 0.0 or v > 1.0:
                raise DatasetError(f"{where}: f{i + 1}={v!r} outside [0, 1]")
        total = sum(vals)
        if abs(total - 1.0) > FREQ_RENORM_BAND:
            raise DatasetError(
                f"{where}: frequency sum {total!r} deviates from 1 by more than "
                f"{FREQ_RENORM_BAND}"
            )
        return cls(values=tuple(v / total for v in vals))


@dataclass(frozen=True)
class Task:
    task_id: str
    job_id: str
    description: str
    freq: FrequencyDistribution


@dataclass(frozen=True)
class Job:
    job_id: str
    title: str
    automation_prob: float
    attributes: dict[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class RelatednessGraph:
    """Undirected task-similarity graph.

    ``adjacency`` has an entry for *every* task in the dataset (possibly
    empty), so neighbor lookups never KeyError and task membership can be
    recovered from the graph alone.
    """

    edges: frozenset[tuple[str, str]]
    adjacency: dict[str, frozenset[str]]

    @classmethod
    def build(cls, pairs, task_ids) -> "RelatednessGraph":
        violations = []
        adj: dict[str, set[str]] = {t: set() for t in task_ids}
        edges = set()
        for a, b in pairs:
            if a == b:
                violations.append(f"self-loop edge on task {a!r}")
                continue
            missing = [t for t in (a, b) if t not in adj]
            if missing:
                violations.append(f"edge ({a!r}, {b!r}) references unknown task(s) {missing}")
                continue
            edge = (a, b) if a < b else (b, a)
            edges.add(edge)
            adj[a].add(b)
            adj[b].add(a)
        if violations:
            raise DatasetError(violations)
        return cls(
            edges=frozenset(edges),
            adjacency={t: frozenset(ns) for t, ns in adj.items()},
        )

    def neighbors(self, task_id: str) -> frozenset[str]:
        return self.adjacency[task_id]


@dataclass(frozen=True)
class Dataset:
    """A full problem instance; immutable after construction."""

    jobs: dict[str, Job]
    tasks: dict[str, Task]
    graph: RelatednessGraph

    def __post_init__(self):
        violations = validate_dataset(self.jobs, self.tasks, self.graph)
        if violations:
            raise DatasetError(violations)

    def tasks_of(self, job_id: str) -> list[Task]:
        return [t for t in self.tasks.values() if t.job_id == job_id]

    def task_ids_of(self, job_id: str) -> list[str]:
        return [t.task_id for t in self.tasks.values() if t.job_id == job_id]

    def without_job(self, job_id: str) -> "Dataset":
        """The dataset with one job, its tasks, and their edges removed."""
        if job_id not in self.jobs:
            raise KeyError(job_id)
        jobs = {j: job for j, job in self.jobs.items() if j != job_id}
        tasks = {t: task for t, task in self.tasks.items() if task.job_id != job_id}
        pairs = [(a, b) for a, b in sorted(self.graph.edges) if a in tasks and b in tasks]
        return Dataset(
            jobs=jobs,
            tasks=tasks,
            graph=RelatednessGraph.build(pairs, list(tasks)),
        )

    def with_job_prob(self, job_id: str, prob: float) -> "Dataset":
        """A copy with one job's automation probability replaced."""
        if job_id not in self.jobs:
            raise KeyError(job_id)
        jobs = dict(self.jobs)
        old = jobs[job_id]
        jobs[job_id] = Job(
            job_id=old.job_id,
            title=old.title,
            automation_prob=float(prob),
            attributes=dict(old.attributes),
        )
        return Dataset(jobs=jobs, tasks=dict(self.tasks), graph=self.graph)


def validate_dataset(jobs, tasks, graph) -> list[str]:
    """Referential-integrity and invariant violations, empty when clean."""
    violations = []
    jobs_with_tasks = set()
    for task in tasks.values():
        if task.job_id not in jobs:
            violations.append(f"task {task.task_id!r} references unknown job {task.job_id!r}")
        jobs_with_tasks.add(task.job_id)
    for job_id, job in jobs.items():
        if job_id not in jobs_with_tasks:
            violations.append(f"job without tasks: {job_id!r}")
        if not (0.0 <= job.automation_prob <= 1.0):
            violations.append(
                f"job {job_id!r}: automation_prob {job.automation_prob!r} outside [0, 1]"
            )
        for name, value in job.attributes.items():
            if not math.isfinite(value):
                violations.append(f"job {job_id!r}: attribute {name!r} is not finite")
    for t in graph.adjacency:
        if t not in tasks:
            violations.append(f"graph references unknown task {t!r}")
    for t in tasks:
        if t not in graph.adjacency:
            violations.append(f"graph is missing an adjacency entry for task {t!r}")
    return violations


def derive_job_relatedness(dataset: Dataset) -> set[tuple[str, str]]:
    """Unordered job pairs owning at least one related task pair.

    Same-job task edges never induce a pair; the relation is symmetric and
    not transitive.
    """
    pairs: set[tuple[str, str]] = set()
    for a, b in dataset.graph.edges:
        ja = dataset.tasks[a].job_id
        jb = dataset.tasks[b].job_id
        if ja != jb:
            pairs.add((ja, jb) if ja < jb else (jb, ja))
    return pairs


# ---------------------------------------------------------------------------
# CSV ingestion
# ---------------------------------------------------------------------------


def _read_rows(path, expected_header):
    """Yield (line_number, row) dicts; header and field-count errors carry file+line."""
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError(f"{path}:1: empty file, expected header {expected_header}")
        if header != list(expected_header):
            raise DatasetError(
                f"{path}:1: bad header {header!r}, expected {list(expected_header)!r}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(expected_header):
                raise DatasetError(
                    f"{path}:{lineno}: expected {len(expected_header)} fields, got {len(row)}"
                )
            yield lineno, dict(zip(expected_header, row))


def _parse_float(text, where):
    try:
        value = float(text)
    except ValueError:
        raise DatasetError(f"{where}: {text!r} is not a number")
    if not math.isfinite(value):
        raise DatasetError(f"{where}: {text!r} is not finite")
    return value


def load_dataset(jobs_path, tasks_path, edges_path, attrs_path=None) -> Dataset:
    """Load and validate a dataset from its CSV files.

    Raises DatasetError naming file, line, and reason for malformed rows,
    duplicate ids, dangling references, and frequency sums outside the
    renormalization band.
    """
    jobs: dict[str, Job] = {}
    for lineno, row in _read_rows(jobs_path, ("job_id", "title", "automation_prob")):
        where = f"{jobs_path}:{lineno}"
        job_id = row["job_id"]
        if job_id in jobs:
            raise DatasetError(f"{where}: duplicate job_id {job_id!r}")
        prob = _parse_float(row["automation_prob"], where)
        if not (0.0 <= prob <= 1.0):
            raise DatasetError(f"{where}: automation_prob {prob!r} outside [0, 1]")
        jobs[job_id] = Job(job_id=job_id, title=row["title"], automation_prob=prob)

    tasks: dict[str, Task] = {}
    for lineno, row in _read_rows(
        tasks_path, ("task_id", "job_id", "description") + FREQ_COLUMNS
    ):
        where = f"{tasks_path}:{lineno}"
        task_id = row["task_id"]
        if task_id in tasks:
            raise DatasetError(f"{where}: duplicate task_id {task_id!r}")
        if row["job_id"] not in jobs:
            raise DatasetError(f"{where}: unknown job_id {row['job_id']!r}")
        freq = FrequencyDistribution.from_raw(
            [_parse_float(row[c], where) for c in FREQ_COLUMNS], where
        )
        tasks[task_id] = Task(
            task_id=task_id, job_id=row["job_id"], description=row["description"], freq=freq
        )

    pairs = []
    for lineno, row in _read_rows(edges_path, ("task_id_a", "task_id_b")):
        where = f"{edges_path}:{lineno}"
        a, b = row["task_id_a"], row["task_id_b"]
        if a == b:
            raise DatasetError(f"{where}: self-loop edge on task {a!r}")
        for t in (a, b):
            if t not in tasks:
                raise DatasetError(f"{where}: unknown task_id {t!r}")
        pairs.append((a, b))

    if attrs_path is not None and Path(attrs_path).exists():
        seen = set()
        for lineno, row in _read_rows(attrs_path, ("job_id", "attribute", "value")):
            where = f"{attrs_path}:{lineno}"
            job_id, attr = row["job_id"], row["attribute"]
            if job_id not in jobs:
                raise DatasetError(f"{where}: unknown job_id {job_id!r}")
            if (job_id, attr) in seen:
                raise DatasetError(f"{where}: duplicate attribute {attr!r} for job {job_id!r}")
            seen.add((job_id, attr))
            jobs[job_id].attributes[attr] = _parse_float(row["value"], where)

    return Dataset(jobs=jobs, tasks=tasks, graph=RelatednessGraph.build(pairs, list(tasks)))


def load_dataset_dir(directory) -> Dataset:
    """Load jobs.csv/tasks.csv/related.csv[/attributes.csv] from a directory."""
    directory = Path(directory)
    return load_dataset(
        directory / "jobs.csv",
        directory / "tasks.csv",
        directory / "related.csv",
        directory / "attributes.csv",
    )


def _fmt(x: float) -> str:
    """Shortest round-trip decimal form, so write->read is lossless."""
    return repr(float(x))


def save_dataset_csv(dataset: Dataset, directory) -> None:
    """Emit the four CSV files into a directory (edges sorted for stability)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    with open(directory / "jobs.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("job_id", "title", "automation_prob"))
        for job in dataset.jobs.values():
            w.writerow((job.job_id, job.title, _fmt(job.automation_prob)))
    with open(directory / "tasks.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("task_id", "job_id", "description") + FREQ_COLUMNS)
        for task in dataset.tasks.values():
            w.writerow(
                (task.task_id, task.job_id, task.description)
                + tuple(_fmt(v) for v in task.freq.values)
            )
    with open(directory / "related.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("task_id_a", "task_id_b"))
        for a, b in sorted(dataset.graph.edges):
            w.writerow((a, b))
    with open(directory / "attributes.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("job_id", "attribute", "value"))
        for job in dataset.jobs.values():
            for name, value in job.attributes.items():
                w.writerow((job.job_id, name, _fmt(value)))


# ---------------------------------------------------------------------------
# JSON mirror
# ---------------------------------------------------------------------------


def dataset_to_json_dict(dataset: Dataset) -> dict:
    return {
        "jobs": [
            {
                "job_id": job.job_id,
                "title": job.title,
                "automation_prob": job.automation_prob,
                "attributes": dict(job.attributes),
            }
            for job in dataset.jobs.values()
        ],
        "tasks": [
            {
                "task_id": task.task_id,
                "job_id": task.job_id,
                "description": task.description,
                **{col: v for col, v in zip(FREQ_COLUMNS, task.freq.values)},
            }
            for task in dataset.tasks.values()
        ],
        "related": [[a, b] for a, b in sorted(dataset.graph.edges)],
    }


def save_dataset_json(dataset: Dataset, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(dataset_to_json_dict(dataset), fh, indent=2, allow_nan=False)
        fh.write("\n")


def load_dataset_json(path) -> Dataset:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    jobs: dict[str, Job] = {}
    for i, rec in enumerate(doc.get("jobs", [])):
        where = f"{path}: jobs[{i}]"
        job_id = rec["job_id"]
        if job_id in jobs:
            raise DatasetError(f"{where}: duplicate job_id {job_id!r}")
        prob = float(rec["automation_prob"])
        if not (0.0 <= prob <= 1.0):
            raise DatasetError(f"{where}: automation_prob {prob!r} outside [0, 1]")
        jobs[job_id] = Job(
            job_id=job_id,
            title=rec.get("title", ""),
            automation_prob=prob,
            attributes={k: float(v) for k, v in rec.get("attributes", {}).items()},
        )
    tasks: dict[str, Task] = {}
    for i, rec in enumerate(doc.get("tasks", [])):
        where = f"{path}: tasks[{i}]"
        task_id = rec["task_id"]
        if task_id in tasks:
            raise DatasetError(f"{where}: duplicate task_id {task_id!r}")
        if rec["job_id"] not in jobs:
            raise DatasetError(f"{where}: unknown job_id {rec['job_id']!r}")
        freq = FrequencyDistribution.from_raw([rec[c] for c in FREQ_COLUMNS], where)
        tasks[task_id] = Task(
            task_id=task_id,
            job_id=rec["job_id"],
            description=rec.get("description", ""),
            freq=freq,
        )
    pairs = [(a, b) for a, b in doc.get("related", [])]
    return Dataset(jobs=jobs, tasks=tasks, graph=RelatednessGraph.build(pairs, list(tasks)))


def load_any(path) -> Dataset:
    """Load a dataset from a CSV directory or a single JSON document."""
    p = Path(path)
    if p.is_dir():
        return load_dataset_dir(p)
    if p.suffix.lower() == ".json":
        return load_dataset_json(p)
    raise DatasetError(f"{p}: expected a dataset directory or a .json file")
