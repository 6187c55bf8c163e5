"""Linear program representation, a deterministic solver front end, and a
brute-force vertex-enumeration oracle for desk-scale verification.

All problems are minimization problems.  Constraint rows are stored sparsely
as ``(variable_index, coefficient)`` pairs because the production instances
have ~1e5 variables but rows touching at most a handful of them.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

# Named numeric contracts.  Feasibility: constraint residual allowed in an
# accepted solution.  Optimality: objective agreement demanded between the
# solver and the enumeration oracle on desk-scale instances.
FEASIBILITY_TOL = 1e-7
OPTIMALITY_TOL = 1e-9

# Backend identifier recorded in run manifests so numeric provenance is
# auditable.  HiGHS dual simplex is deterministic for a fixed variable and
# constraint ordering, which is the reproducibility property we rely on.
SOLVER_BACKEND = "scipy-linprog-highs-dual-simplex"

RELATIONS = ("<=", ">=", "=")

# The oracle enumerates candidate active sets; beyond this many candidate
# rows the subset count explodes and the request is rejected.
ORACLE_MAX_ROWS = 20


class SolverBreakdownError(RuntimeError):
    """Numeric failure inside a solve; infeasible/unbounded are *statuses*."""


@dataclass(frozen=True)
class LpSolution:
    """Solver output: a status plus, when optimal, values and objective."""

    status: str  # "optimal" | "infeasible" | "unbounded"
    values: dict[str, float]
    objective: float

    def value(self, name: str) -> float:
        return self.values[name]


class LpProblem:
    """A sparse minimization LP built incrementally.

    Variables carry bounds and an objective coefficient; constraints are
    sparse rows with a relation from ``{"<=", ">=", "="}``.  Construction
    order is significant: it fixes the column/row ordering handed to the
    solver and therefore the solution picked among multiple optima.
    """

    def __init__(self, name: str = "lp") -> None:
        self.name = name
        self.var_names: list[str] = []
        self._var_index: dict[str, int] = {}
        self.lower: list[float] = []
        self.upper: list[float] = []
        self.objective: list[float] = []
        # (sparse row, relation, rhs)
        self.rows: list[tuple[tuple[tuple[int, float], ...], str, float]] = []

    @property
    def num_variables(self) -> int:
        return len(self.var_names)

    @property
    def num_constraints(self) -> int:
        return len(self.rows)

    @property
    def num_objective_variables(self) -> int:
        """Count of variables with a nonzero objective coefficient."""
        return sum(1 for c in self.objective if c != 0.0)

    def variable_index(self, name: str) -> int:
        return self._var_index[name]

    def add_variable(
        self,
        name: str,
        lower: float = 0.0,
        upper: float = math.inf,
        objective: float = 0.0,
    ) -> int:
        if name in self._var_index:
            raise ValueError(f"duplicate variable name: {name!r}")
        if lower > upper:
            raise ValueError(f"variable {name!r}: lower bound {lower} > upper bound {upper}")
        index = len(self.var_names)
        self.var_names.append(name)
        self._var_index[name] = index
        self.lower.append(float(lower))
        self.upper.append(float(upper))
        self.objective.append(float(objective))
        return index

    def add_constraint(
        self,
        coeffs: Iterable[tuple[int, float]],
        relation: str,
        rhs: float,
    ) -> int:
        if relation not in RELATIONS:
            raise ValueError(f"unknown relation {relation!r}")
        row = tuple((int(i), float(c)) for i, c in coeffs)
        for i, _ in row:
            if not 0 <= i < len(self.var_names):
                raise ValueError(f"constraint references undeclared variable index {i}")
        self.rows.append((row, relation, float(rhs)))
        return len(self.rows) - 1

    def objective_value(self, values: dict[str, float]) -> float:
        return float(
            sum(c * values[n] for n, c in zip(self.var_names, self.objective) if c != 0.0)
        )


def _scipy_arrays(problem: LpProblem):
    """Split rows into (A_ub, b_ub, A_eq, b_eq) sparse matrices for linprog."""
    n = problem.num_variables
    ub_data: list[float] = []
    ub_i: list[int] = []
    ub_j: list[int] = []
    ub_rhs: list[float] = []
    eq_data: list[float] = []
    eq_i: list[int] = []
    eq_j: list[int] = []
    eq_rhs: list[float] = []
    for row, relation, rhs in problem.rows:
        if relation == "=":
            r = len(eq_rhs)
            eq_rhs.append(rhs)
            for j, c in row:
                eq_i.append(r)
                eq_j.append(j)
                eq_data.append(c)
        else:
            sign = 1.0 if relation == "<=" else -1.0
            r = len(ub_rhs)
            ub_rhs.append(sign * rhs)
            for j, c in row:
                ub_i.append(r)
                ub_j.append(j)
                ub_data.append(sign * c)

    A_ub = sp.coo_matrix((ub_data, (ub_i, ub_j)), shape=(len(ub_rhs), n)).tocsr() if ub_rhs else None
    A_eq = sp.coo_matrix((eq_data, (eq_i, eq_j)), shape=(len(eq_rhs), n)).tocsr() if eq_rhs else None
    b_ub = np.asarray(ub_rhs) if ub_rhs else None
    b_eq = np.asarray(eq_rhs) if eq_rhs else None
    return A_ub, b_ub, A_eq, b_eq


def _check_and_snap(problem: LpProblem, x: np.ndarray) -> np.ndarray:
    """Snap values onto bounds they graze and verify feasibility.

    Bound violations within FEASIBILITY_TOL are solver round-off and are
    clamped so callers can rely on box bounds holding exactly; anything
    larger is a numeric breakdown.
    """
    lower = np.asarray(problem.lower)
    upper = np.asarray(problem.upper)
    below = lower - x
    above = x - upper
    worst = max(float(below.max(initial=0.0)), float(above.max(initial=0.0)))
    if worst > FEASIBILITY_TOL:
        raise SolverBreakdownError(
            f"{problem.name}: bound violation {worst:.3e} exceeds {FEASIBILITY_TOL}"
        )
    x = np.clip(x, lower, upper)
    for row, relation, rhs in problem.rows:
        lhs = sum(c * x[j] for j, c in row)
        resid = lhs - rhs
        tol = FEASIBILITY_TOL * max(1.0, abs(rhs))
        bad = (
            (relation == "<=" and resid > tol)
            or (relation == ">=" and resid < -tol)
            or (relation == "=" and abs(resid) > tol)
        )
        if bad:
            raise SolverBreakdownError(
                f"{problem.name}: constraint residual {resid:.3e} violates {relation} {rhs}"
            )
    return x


def solve(problem: LpProblem) -> LpSolution:
    """Minimize the problem with the deterministic HiGHS dual-simplex backend.

    Infeasible and unbounded instances come back as statuses; any other
    unsuccessful termination raises SolverBreakdownError.
    """
    if problem.num_variables == 0:
        return LpSolution(status="optimal", values={}, objective=0.0)
    A_ub, b_ub, A_eq, b_eq = _scipy_arrays(problem)
    bounds = [
        (l if math.isfinite(l) else None, u if math.isfinite(u) else None)
        for l, u in zip(problem.lower, problem.upper)
    ]
    res = linprog(
        c=np.asarray(problem.objective),
        A_ub=A_ub,
        b_ub=b_ub,
        A_eq=A_eq,
        b_eq=b_eq,
        bounds=bounds,
        method="highs-ds",
    )
    if res.status == 2:
        return LpSolution(status="infeasible", values={}, objective=math.nan)
    if res.status == 3:
        return LpSolution(status="unbounded", values={}, objective=math.nan)
    if res.status != 0:
        raise SolverBreakdownError(f"{problem.name}: {res.message}")
    x = _check_and_snap(problem, np.asarray(res.x, dtype=float))
    values = {name: float(v) for name, v in zip(problem.var_names, x)}
    return LpSolution(status="optimal", values=values, objective=problem.objective_value(values))


# ---------------------------------------------------------------------------
# Vertex-enumeration oracle
# ---------------------------------------------------------------------------

_ORACLE_FEAS_TOL = 1e-8
_ORACLE_ACTIVE_TOL = 1e-9


def _candidate_rows(problem: LpProblem) -> tuple[np.ndarray, np.ndarray, list[str]]:
    """All hyperplanes that can be active at a vertex: rows plus finite bounds.

    Returns (normals, offsets, relations) where relations use the problem's
    symbols and bounds appear as ">=" (lower) / "<=" (upper) rows.
    """
    n = problem.num_variables
    normals: list[np.ndarray] = []
    offsets: list[float] = []
    relations: list[str] = []
    for row, relation, rhs in problem.rows:
        a = np.zeros(n)
        for j, c in row:
            a[j] += c
        normals.append(a)
        offsets.append(rhs)
        relations.append(relation)
    for j in range(n):
        if math.isfinite(problem.lower[j]):
            a = np.zeros(n)
            a[j] = 1.0
            normals.append(a)
            offsets.append(problem.lower[j])
            relations.append(">=")
        if math.isfinite(problem.upper[j]):
            a = np.zeros(n)
            a[j] = 1.0
            normals.append(a)
            offsets.append(problem.upper[j])
            relations.append("<=")
    return np.array(normals).reshape(len(normals), n), np.array(offsets), relations


def _feasible_mask(points: np.ndarray, normals: np.ndarray, offsets: np.ndarray,
                   relations: list[str]) -> np.ndarray:
    """Which candidate points satisfy every relation within tolerance."""
    resid = points @ normals.T - offsets  # (k, rows)
    ok = np.ones(len(points), dtype=bool)
    for r, relation in enumerate(relations):
        tol = _ORACLE_FEAS_TOL * max(1.0, abs(offsets[r]))
        if relation == "<=":
            ok &= resid[:, r] <= tol
        elif relation == ">=":
            ok &= resid[:, r] >= -tol
        else:
            ok &= np.abs(resid[:, r]) <= tol
    return ok


def _enumerate_vertices(normals: np.ndarray, offsets: np.ndarray,
                        relations: list[str], n: int) -> np.ndarray:
    """All vertices of the polyhedron, via exhaustive active-set enumeration."""
    rows = len(offsets)
    if n == 0 or rows < n:
        return np.empty((0, n))
    combos = np.array(list(itertools.combinations(range(rows), n)), dtype=int)
    mats = normals[combos]          # (k, n, n)
    rhs = offsets[combos]           # (k, n)
    dets = np.linalg.det(mats)
    keep = np.abs(dets) > 1e-12
    if not keep.any():
        return np.empty((0, n))
    points = np.linalg.solve(mats[keep], rhs[keep][..., None])[..., 0]
    # Discard candidates whose active rows were solved inaccurately.
    active_resid = np.abs(np.einsum("kij,kj->ki", mats[keep], points) - rhs[keep])
    points = points[active_resid.max(axis=1) <= 1e-7]
    feasible = points[_feasible_mask(points, normals, offsets, relations)]
    return feasible


def _has_negative_ray(problem: LpProblem, normals: np.ndarray,
                      relations: list[str]) -> bool:
    """Whether the recession cone contains a direction of objective decrease.

    The cone is intersected with the unit box so its extreme directions can
    be enumerated with the same vertex machinery.
    """
    n = problem.num_variables
    dir_normals: list[np.ndarray] = []
    dir_offsets: list[float] = []
    dir_relations: list[str] = []
    for a, relation in zip(normals[: len(problem.rows)], relations[: len(problem.rows)]):
        dir_normals.append(a)
        dir_offsets.append(0.0)
        dir_relations.append(relation)
    for j in range(n):
        a = np.zeros(n)
        a[j] = 1.0
        if math.isfinite(problem.lower[j]):
            dir_normals.append(a)
            dir_offsets.append(0.0)
            dir_relations.append(">=")
        if math.isfinite(problem.upper[j]):
            dir_normals.append(a)
            dir_offsets.append(0.0)
            dir_relations.append("<=")
        # unit-box normalization
        dir_normals.append(a)
        dir_offsets.append(-1.0)
        dir_relations.append(">=")
        dir_normals.append(a)
        dir_offsets.append(1.0)
        dir_relations.append("<=")
    dn = np.array(dir_normals)
    do = np.array(dir_offsets)
    if len(do) > 2 * ORACLE_MAX_ROWS:
        raise ValueError("problem too large for enumeration (ray check)")
    directions = _enumerate_vertices(dn, do, dir_relations, n)
    if len(directions) == 0:
        return False
    c = np.asarray(problem.objective)
    return bool((directions @ c < -OPTIMALITY_TOL).any())


def enumerate_vertices_oracle(problem: LpProblem) -> LpSolution:
    """Exact optimum by evaluating the objective at every polytope vertex.

    Exhaustive and exponential: rejects instances with more than
    ORACLE_MAX_ROWS candidate active rows.  Independent of solve() by
    construction; used to certify it on desk-scale instances.
    """
    n = problem.num_variables
    normals, offsets, relations = _candidate_rows(problem)
    if len(offsets) > ORACLE_MAX_ROWS:
        raise ValueError(
            f"problem too large for enumeration: {len(offsets)} candidate rows "
            f"(limit {ORACLE_MAX_ROWS})"
        )
    vertices = _enumerate_vertices(normals, offsets, relations, n)
    every_var_boxed = all(
        math.isfinite(l) and math.isfinite(u)
        for l, u in zip(problem.lower, problem.upper)
    )
    if len(vertices) == 0:
        # A pointed region with no vertex is empty; a non-pointed one is
        # beyond this oracle.
        if np.linalg.matrix_rank(normals) < n:
            raise ValueError("oracle cannot decide: feasible region is not pointed")
        return LpSolution(status="infeasible", values={}, objective=math.nan)
    if not every_var_boxed and _has_negative_ray(problem, normals, relations):
        return LpSolution(status="unbounded", values={}, objective=math.nan)
    c = np.asarray(problem.objective)
    objectives = vertices @ c
    best = int(np.argmin(objectives))
    values = {name: float(v) for name, v in zip(problem.var_names, vertices[best])}
    return LpSolution(status="optimal", values=values, objective=float(objectives[best]))


# ---------------------------------------------------------------------------
# Debug dump
# ---------------------------------------------------------------------------


def write_lp_text(problem: LpProblem, path) -> None:
    """Write the problem in fixed-layout LP interchange format.

    Variables are renamed v0..vN (original names can contain characters LP
    parsers reject); the mapping is emitted as comments.
    """
    lines: list[str] = [f"\\ {problem.name}"]
    for i, name in enumerate(problem.var_names):
        lines.append(f"\\ v{i} = {name}")
    terms = [
        f"{c:+.17g} v{i}" for i, c in enumerate(problem.objective) if c != 0.0
    ]
    lines.append("Minimize")
    lines.append(" obj: " + (" ".join(terms) if terms else "0 v0"))
    lines.append("Subject To")
    rel_text = {"<=": "<=", ">=": ">=", "=": "="}
    for r, (row, relation, rhs) in enumerate(problem.rows):
        body = " ".join(f"{c:+.17g} v{j}" for j, c in row)
        lines.append(f" c{r}: {body} {rel_text[relation]} {rhs:.17g}")
    lines.append("Bounds")
    for i, (l, u) in enumerate(zip(problem.lower, problem.upper)):
        lo = f"{l:.17g}" if math.isfinite(l) else "-inf"
        hi = f"{u:.17g}" if math.isfinite(u) else "+inf"
        lines.append(f" {lo} <= v{i} <= {hi}")
    lines.append("End")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
