"""Delivery-rate functionals of the modified coded caching scheme (MCCS) and
the converse bounds under uncoded placement.

All rates are in units of files. Per-demand functions take a demand vector of
zero-based file indices, one entry per user; bound functions take the
distinct file set instead.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Literal, Sequence

import numpy as np

from mccs.combinatorics import (
    binomial,
    enumerate_demand_classes,
    iter_demands,
    leader_group,
    members,
    non_redundant_subsets,
    popcount,
    demand_probability,
)
from mccs.errors import InvalidInstanceError, InvalidPlacementError
from mccs.model import Placement, ProblemInstance, is_popularity_first, require_valid

#: Largest distinct set for which the bound maximizes over all bijections.
PERMUTATION_LIMIT = 10


@dataclass(frozen=True)
class RateBreakdown:
    """Delivery load of one demand, split by coded-message subset size.

    ``per_subset_size[l]`` is the total length of messages sent to subsets of
    ``l + 1`` users.
    """

    total: float
    per_subset_size: tuple[float, ...]

    @classmethod
    def from_levels(cls, levels: Sequence[Sequence[float]]) -> "RateBreakdown":
        per = tuple(math.fsum(terms) for terms in levels)
        return cls(math.fsum(per), per)


def _check_demand(instance: ProblemInstance, d: Sequence[int]) -> tuple[int, ...]:
    d = tuple(int(x) for x in d)
    if len(d) != instance.k_users:
        raise ValueError(f"demand has {len(d)} entries, expected K={instance.k_users}")
    if any(not 0 <= x < instance.n_files for x in d):
        raise ValueError(f"demand {d} references a file outside 0..{instance.n_files - 1}")
    return d


def _require_q(instance: ProblemInstance, placement) -> Placement:
    placement = require_valid(instance, placement)
    if not is_popularity_first(placement):
        raise InvalidPlacementError("placement is not popularity-first")
    return placement


def _mccs_levels(a: np.ndarray, d: tuple[int, ...], leaders: int | None) -> list[list[float]]:
    k = len(d)
    levels: list[list[float]] = [[] for _ in range(k)]
    for s in non_redundant_subsets(d, leaders):
        l = popcount(s) - 1
        levels[l].append(max(a[d[u], l] for u in members(s)))
    return levels


def rate_mccs(instance: ProblemInstance, placement, d: Sequence[int],
              leaders: int | None = None) -> RateBreakdown:
    """Sum over non-redundant subsets S of the zero-padded message length
    max_{k in S} a[d_k, |S|-1].

    ``leaders`` overrides the canonical leader group (bitmask).
    """
    placement = require_valid(instance, placement)
    d = _check_demand(instance, d)
    return RateBreakdown.from_levels(_mccs_levels(placement.a, d, leaders))


def leader_order(d: Sequence[int]) -> list[int]:
    """Leader users sorted by the popularity rank of the file they request."""
    u = leader_group(d)
    return sorted(members(u), key=lambda k: d[k])


def _grouped_levels(a: np.ndarray, d: tuple[int, ...]) -> list[list[float]]:
    k = len(d)
    levels: list[list[float]] = [[] for _ in range(k)]
    psi = leader_order(d)
    everyone = (1 << k) - 1
    excluded = 0
    for i, leader in enumerate(psi, start=1):
        allowed = everyone & ~excluded
        bit = 1 << leader
        for l in range(k):
            count = 0
            for s in range(1, 1 << k):
                if s & bit and not s & ~allowed and popcount(s) == l + 1:
                    levels[l].append(max(a[d[u], l] for u in members(s)))
                    count += 1
            assert count == binomial(k - i, l)
        excluded |= bit
    return levels


def rate_mccs_grouped(instance: ProblemInstance, placement, d: Sequence[int]) -> RateBreakdown:
    """Same load as :func:`rate_mccs`, summed leader by leader.

    Leaders are taken in popularity order; leader ``i`` collects the subsets
    that contain it but none of the more popular leaders, which is
    C(K - i, l) subsets at each size l + 1.
    """
    placement = _require_q(instance, placement)
    d = _check_demand(instance, d)
    return RateBreakdown.from_levels(_grouped_levels(placement.a, d))


def _position_weights(k: int) -> np.ndarray:
    # w[i-1, l] = C(K - i, l) for l < K
    return np.array([[binomial(k - i, l) for l in range(k)] for i in range(1, k + 1)], dtype=float)


def _bound_terms(a: np.ndarray, order: Sequence[int], w: np.ndarray) -> list[float]:
    return [float(w[i, l] * a[n, l]) for i, n in enumerate(order) for l in range(w.shape[1])
            if w[i, l] != 0.0]


def _lb_max(a: np.ndarray, files: tuple[int, ...]) -> float:
    k = a.shape[1] - 1
    w = _position_weights(k)
    return max(math.fsum(_bound_terms(a, perm, w)) for perm in itertools.permutations(files))


def _lb_popfirst(a: np.ndarray, files: tuple[int, ...]) -> float:
    k = a.shape[1] - 1
    return math.fsum(_bound_terms(a, sorted(files), _position_weights(k)))


def _check_files(instance: ProblemInstance, files: Iterable[int]) -> tuple[int, ...]:
    files = tuple(sorted(set(int(n) for n in files)))
    if not files:
        raise ValueError("distinct set must be nonempty")
    if len(files) > instance.k_users:
        raise ValueError(f"distinct set larger than K={instance.k_users}")
    if files[0] < 0 or files[-1] >= instance.n_files:
        raise ValueError("distinct set references an unknown file")
    return files


def rate_lb(instance: ProblemInstance, placement, files: Iterable[int]) -> float:
    """Per-class converse bound for any uncoded placement: the maximum over
    all orderings of ``files`` of sum_i sum_l C(K-i, l) a[file_i, l]."""
    placement = require_valid(instance, placement)
    files = _check_files(instance, files)
    if len(files) > PERMUTATION_LIMIT:
        raise ValueError(f"|D| = {len(files)} exceeds the permutation limit {PERMUTATION_LIMIT}")
    return _lb_max(placement.a, files)


def rate_lb_popfirst(instance: ProblemInstance, placement, files: Iterable[int]) -> float:
    """The converse bound with files taken in popularity order (placement in Q)."""
    placement = _require_q(instance, placement)
    files = _check_files(instance, files)
    return _lb_popfirst(placement.a, files)


def avg_rate_mccs(instance: ProblemInstance, placement) -> float:
    """Expected MCCS load, by exact enumeration of all N**K demands."""
    placement = require_valid(instance, placement)
    a = placement.a
    terms = []
    for d in iter_demands(instance):
        pr = demand_probability(instance, d)
        if pr == 0.0:
            continue
        r = math.fsum(math.fsum(t) for t in _mccs_levels(a, d, None))
        terms.append(pr * r)
    return math.fsum(terms)


def avg_rate_lb(instance: ProblemInstance, placement, popfirst: bool = False) -> float:
    placement = _require_q(instance, placement) if popfirst else require_valid(instance, placement)
    a = placement.a
    per_class = _lb_popfirst if popfirst else _lb_max
    terms = [c.weight * per_class(a, c.distinct_set) for c in enumerate_demand_classes(instance)]
    return math.fsum(terms)


def avg_rate_distinct(instance: ProblemInstance, placement,
                      which: Literal["mccs", "lb"] = "mccs") -> float:
    """Expected load conditioned on all K users requesting different files.

    The conditional law is the exact joint law restricted to all-distinct
    demands and renormalized.
    """
    if instance.k_users > instance.n_files:
        raise InvalidInstanceError("all-distinct demands need K <= N")
    if which == "mccs":
        placement = require_valid(instance, placement)
    elif which == "lb":
        placement = _require_q(instance, placement)
    else:
        raise ValueError(f"which must be 'mccs' or 'lb', got {which!r}")
    a = placement.a
    probs, terms = [], []
    for d in itertools.permutations(range(instance.n_files), instance.k_users):
        pr = demand_probability(instance, d)
        if pr == 0.0:
            continue
        if which == "mccs":
            r = math.fsum(math.fsum(t) for t in _mccs_levels(a, d, None))
        else:
            r = _lb_popfirst(a, tuple(sorted(d)))
        probs.append(pr)
        terms.append(pr * r)
    mass = math.fsum(probs)
    if mass == 0.0:
        raise InvalidInstanceError("all-distinct demands have zero probability")
    return math.fsum(terms) / mass


def padded_subsets(instance: ProblemInstance, placement, d: Sequence[int],
                   tol: float = 1e-9) -> list[tuple[int, float]]:
    """Subsets whose message is longer than the matching converse-bound term.

    Returns ``(subset_mask, excess)`` pairs. In the leader-by-leader grouping,
    leader ``i``'s subsets are compared with a[phi(i), l]; any excess comes
    from zero-padding to a redundant user's longer subfile.
    """
    placement = _require_q(instance, placement)
    d = _check_demand(instance, d)
    a = placement.a
    k = len(d)
    out = []
    excluded = 0
    for leader in leader_order(d):
        bit = 1 << leader
        for s in range(1, 1 << k):
            if s & bit and not s & excluded:
                l = popcount(s) - 1
                excess = max(a[d[u], l] for u in members(s)) - a[d[leader], l]
                if excess > tol:
                    out.append((s, float(excess)))
        excluded |= bit
    return sorted(out)


def region(k_users: int, n_distinct: int) -> int:
    """1 for K <= 2, 2 when every request is distinct, 3 otherwise."""
    if k_users <= 2:
        return 1
    return 2 if n_distinct == k_users else 3
