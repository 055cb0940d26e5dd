"""Placement optimization (P0) and converse-bound (P1, P2) linear programs.

Variables ``a[n, l]`` are laid out row-major, file by file; P1 appends one
epigraph variable per demand class.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from mccs.combinatorics import (
    DemandClass,
    binomial,
    demand_probability,
    enumerate_demand_classes,
    iter_demands,
    members,
    non_redundant_subsets,
    popcount,
)
from mccs.errors import EnumerationLimitError, SolverError
from mccs.lp.program import LinearProgram, LpSolution
from mccs.lp.simplex import solve
from mccs.model import Placement, ProblemInstance, ValidationReport, validate_placement

Problem = Literal["P0", "P1", "P2"]

#: Guard on N**K * 2**K for building the P0 objective.
P0_LIMIT = 10 ** 8
#: Largest distinct set expanded into permutation constraints in P1.
P1_MAX_CLASS = 8


def var_index(k_users: int, n: int, l: int) -> int:
    return n * (k_users + 1) + l


def placement_names(instance: ProblemInstance) -> list[str]:
    return [f"a_{n}_{l}" for n in range(instance.n_files) for l in range(instance.k_users + 1)]


def _base_constraints(instance: ProblemInstance, n_vars: int, popularity_first: bool):
    """Partition equalities, the cache budget and optionally the Q ordering."""
    n_files, k = instance.n_files, instance.k_users
    a_eq = np.zeros((n_files, n_vars))
    for n in range(n_files):
        for l in range(k + 1):
            a_eq[n, var_index(k, n, l)] = math.comb(k, l)
    b_eq = np.ones(n_files)
    eq_names = [f"partition_{n}" for n in range(n_files)]

    rows, rhs, names = [], [], []
    cache = np.zeros(n_vars)
    for n in range(n_files):
        for l in range(1, k + 1):
            cache[var_index(k, n, l)] = math.comb(k - 1, l - 1)
    rows.append(cache)
    rhs.append(instance.cache_size)
    names.append("cache")
    if popularity_first:
        for n in range(n_files - 1):
            for l in range(1, k + 1):
                row = np.zeros(n_vars)
                row[var_index(k, n + 1, l)] = 1.0
                row[var_index(k, n, l)] = -1.0
                rows.append(row)
                rhs.append(0.0)
                names.append(f"popfirst_{n}_{l}")
    return a_eq, b_eq, eq_names, np.array(rows), np.array(rhs), names


def p0_coefficients(instance: ProblemInstance) -> np.ndarray:
    """Linearized expected MCCS load: ``c[n, l]`` is the expected number of
    size-(l+1) non-redundant subsets whose most popular requested file is n.

    With a popularity-first placement the zero-padded length of such a
    message is exactly ``a[n, l]``, so the expected load is ``sum(c * a)``.
    """
    n_files, k = instance.n_files, instance.k_users
    if n_files ** k * 2 ** k > P0_LIMIT:
        raise EnumerationLimitError(
            f"N^K * 2^K = {n_files ** k * 2 ** k} exceeds {P0_LIMIT}; reduce N or K")
    terms: list[list[list[float]]] = [[[] for _ in range(k + 1)] for _ in range(n_files)]
    for d in iter_demands(instance):
        pr = demand_probability(instance, d)
        if pr == 0.0:
            continue
        for s in non_redundant_subsets(d):
            top = min(d[u] for u in members(s))
            terms[top][popcount(s) - 1].append(pr)
    return np.array([[math.fsum(t) for t in row] for row in terms])


def build_p0(instance: ProblemInstance) -> LinearProgram:
    n_vars = instance.n_files * (instance.k_users + 1)
    c = p0_coefficients(instance).ravel()
    a_eq, b_eq, eq_names, a_ub, b_ub, ub_names = _base_constraints(instance, n_vars, True)
    return LinearProgram(c, a_eq, b_eq, a_ub, b_ub, np.zeros(n_vars),
                         names=tuple(placement_names(instance)),
                         eq_names=tuple(eq_names), ub_names=tuple(ub_names), title="P0")


def _bound_row(k: int, files, n_vars: int) -> np.ndarray:
    """Coefficients of sum_i sum_{l<K} C(K-i, l) a[files[i-1], l]."""
    row = np.zeros(n_vars)
    for i, n in enumerate(files, start=1):
        for l in range(k):
            row[var_index(k, n, l)] += binomial(k - i, l)
    return row


def _classes(instance: ProblemInstance) -> list[DemandClass]:
    classes = enumerate_demand_classes(instance)
    big = max((len(c.distinct_set) for c in classes), default=0)
    if big > P1_MAX_CLASS:
        raise EnumerationLimitError(
            f"distinct sets of size {big} exceed the permutation limit {P1_MAX_CLASS}")
    return classes


def build_p1(instance: ProblemInstance) -> LinearProgram:
    """Converse bound for any uncoded placement, in epigraph form: one
    variable ``r_D`` per demand class bounded below by every ordering of D."""
    k = instance.k_users
    n_place = instance.n_files * (k + 1)
    classes = _classes(instance)
    n_vars = n_place + len(classes)
    a_eq, b_eq, eq_names, a_ub, b_ub, ub_names = _base_constraints(instance, n_vars, False)

    c = np.zeros(n_vars)
    epi_rows, epi_names = [], []
    names = placement_names(instance)
    for j, cls in enumerate(classes):
        col = n_place + j
        label = "_".join(map(str, cls.distinct_set))
        names.append(f"r_{label}")
        c[col] = cls.weight
        for q, perm in enumerate(itertools.permutations(cls.distinct_set)):
            row = _bound_row(k, perm, n_vars)
            row[col] = -1.0
            epi_rows.append(row)
            epi_names.append(f"epi_{label}_{q}")
    if epi_rows:
        a_ub = np.vstack([a_ub, np.array(epi_rows)])
        b_ub = np.concatenate([b_ub, np.zeros(len(epi_rows))])
        ub_names = ub_names + epi_names
    return LinearProgram(c, a_eq, b_eq, a_ub, b_ub, np.zeros(n_vars), names=tuple(names),
                         eq_names=tuple(eq_names), ub_names=tuple(ub_names), title="P1")


def build_p2(instance: ProblemInstance) -> LinearProgram:
    """Converse bound restricted to popularity-first placements; the files of
    each class are taken in popularity order, so no maximization remains."""
    k = instance.k_users
    n_vars = instance.n_files * (k + 1)
    c = np.zeros(n_vars)
    for cls in _classes(instance):
        c += cls.weight * _bound_row(k, sorted(cls.distinct_set), n_vars)
    a_eq, b_eq, eq_names, a_ub, b_ub, ub_names = _base_constraints(instance, n_vars, True)
    return LinearProgram(c, a_eq, b_eq, a_ub, b_ub, np.zeros(n_vars),
                         names=tuple(placement_names(instance)),
                         eq_names=tuple(eq_names), ub_names=tuple(ub_names), title="P2")


BUILDERS = {"P0": build_p0, "P1": build_p1, "P2": build_p2}


def build(instance: ProblemInstance, problem: Problem) -> LinearProgram:
    try:
        return BUILDERS[problem](instance)
    except KeyError:
        raise ValueError(f"unknown problem {problem!r}") from None


@dataclass(frozen=True)
class PlacementSolution:
    placement: Placement
    optimal_rate: float
    problem: str
    lp_solution: LpSolution
    validation: ValidationReport


def _solve_placement(instance: ProblemInstance, problem: Problem, backend: str) -> PlacementSolution:
    lp = build(instance, problem)
    sol = solve(lp, backend=backend)
    if not sol.optimal:
        raise SolverError(f"{problem} solve ended with status {sol.status.value}", sol.status)
    n_place = instance.n_files * (instance.k_users + 1)
    a = sol.point[:n_place].reshape(instance.n_files, instance.k_users + 1)
    placement = Placement(np.where(np.abs(a) < 1e-15, 0.0, a))
    report = validate_placement(instance, placement, check_popularity_first=problem != "P1")
    if not report.ok:
        raise SolverError(f"{problem} optimum failed validation: {report.as_dict()}", sol.status)
    return PlacementSolution(placement, sol.value, problem, sol, report)


def optimize_mccs(instance: ProblemInstance, backend: str = "simplex") -> PlacementSolution:
    """Popularity-first placement minimizing the expected MCCS load."""
    return _solve_placement(instance, "P0", backend)


def lower_bound(instance: ProblemInstance, variant: Literal["P1", "P2"] = "P1",
                backend: str = "simplex") -> PlacementSolution:
    if variant not in ("P1", "P2"):
        raise ValueError(f"variant must be P1 or P2, got {variant!r}")
    return _solve_placement(instance, variant, backend)
