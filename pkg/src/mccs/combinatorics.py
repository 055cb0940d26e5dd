"""User subsets, demand vectors, leader groups and demand-class weights.

User subsets are int bitmasks: bit ``k`` set means user ``k`` is a member.
Whenever a family of subsets is listed it is in increasing bitmask order.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Iterator, Sequence

from mccs.errors import EnumerationLimitError
from mccs.model import ProblemInstance

#: Largest N**K for which demand vectors are enumerated exhaustively.
DEMAND_ENUMERATION_LIMIT = 10 ** 7

Demand = tuple[int, ...]


def binomial(n: int, k: int) -> int:
    """C(n, k), defined as 0 whenever k > n, k < 0 or n < 0."""
    if n < 0 or k < 0 or k > n:
        return 0
    return math.comb(n, k)


def members(mask: int) -> tuple[int, ...]:
    out = []
    i = 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return tuple(out)


def mask_of(users: Iterable[int]) -> int:
    m = 0
    for u in users:
        m |= 1 << u
    return m


def popcount(mask: int) -> int:
    return bin(mask).count("1")


@lru_cache(maxsize=None)
def _subsets_by_size(k_users: int) -> tuple[tuple[int, ...], ...]:
    buckets: list[list[int]] = [[] for _ in range(k_users + 1)]
    for mask in range(1 << k_users):
        buckets[popcount(mask)].append(mask)
    return tuple(tuple(b) for b in buckets)


def subsets_of_size(k_users: int, l: int) -> tuple[int, ...]:
    if not 0 <= l <= k_users:
        raise ValueError(f"subset size {l} out of range 0..{k_users}")
    return _subsets_by_size(k_users)[l]


def distinct_set(d: Sequence[int]) -> frozenset[int]:
    return frozenset(d)


def leader_group(d: Sequence[int]) -> int:
    """One user per distinct requested file: the lowest-index requester."""
    seen: set[int] = set()
    mask = 0
    for k, n in enumerate(d):
        if n not in seen:
            seen.add(n)
            mask |= 1 << k
    return mask


def leader_groups(d: Sequence[int]) -> Iterator[int]:
    """Every valid leader group: any choice of one requester per distinct file."""
    requesters: dict[int, list[int]] = {}
    for k, n in enumerate(d):
        requesters.setdefault(n, []).append(k)
    for choice in itertools.product(*requesters.values()):
        yield mask_of(choice)


def non_redundant_subsets(d: Sequence[int], leaders: int | None = None) -> list[int]:
    """Nonempty user subsets that meet the leader group."""
    u = leader_group(d) if leaders is None else leaders
    return [s for s in range(1, 1 << len(d)) if s & u]


def demand_probability(instance: ProblemInstance, d: Sequence[int]) -> float:
    p = instance.popularity
    prob = 1.0
    for n in d:
        prob *= p[n]
    return prob


def check_enumerable(instance: ProblemInstance, limit: int = DEMAND_ENUMERATION_LIMIT) -> None:
    total = instance.n_files ** instance.k_users
    if total > limit:
        raise EnumerationLimitError(
            f"N^K = {instance.n_files}^{instance.k_users} = {total} demand vectors exceeds "
            f"the enumeration limit {limit}; reduce the number of files or users")


def iter_demands(instance: ProblemInstance) -> Iterator[Demand]:
    check_enumerable(instance)
    return itertools.product(range(instance.n_files), repeat=instance.k_users)


def distinct_set_weight(instance: ProblemInstance, files: Iterable[int],
                        method: str = "inclusion-exclusion") -> float:
    """Probability that the set of requested files is exactly ``files``.

    ``method="enumerate"`` sums the demand probabilities over every demand
    whose distinct set equals ``files`` (used as the cross-check).
    """
    files = tuple(sorted(set(files)))
    k = instance.k_users
    if not files:
        raise ValueError("distinct set must be nonempty")
    if len(files) > k:
        return 0.0
    p = instance.popularity
    if any(p[n] == 0.0 for n in files):
        return 0.0
    if method == "inclusion-exclusion":
        terms = []
        size = len(files)
        for r in range(1, size + 1):
            sign = -1.0 if (size - r) % 2 else 1.0
            for sub in itertools.combinations(files, r):
                terms.append(sign * math.fsum(p[n] for n in sub) ** k)
        return max(0.0, math.fsum(terms))
    if method == "enumerate":
        target = set(files)
        terms = [demand_probability(instance, d)
                 for d in itertools.product(files, repeat=k) if set(d) == target]
        return math.fsum(terms)
    raise ValueError(f"unknown method {method!r}")


@dataclass(frozen=True)
class DemandClass:
    """All demands whose distinct request set is ``distinct_set``."""

    distinct_set: tuple[int, ...]
    weight: float

    def demands(self, k_users: int) -> Iterator[Demand]:
        """Every demand vector in the class, in lexicographic order."""
        target = set(self.distinct_set)
        for d in itertools.product(self.distinct_set, repeat=k_users):
            if set(d) == target:
                yield d

    def representative(self, k_users: int) -> Demand:
        """Canonical member: files in increasing order, the most popular
        file repeated to fill the remaining users."""
        files = self.distinct_set
        return tuple(files) + (files[0],) * (k_users - len(files))


def enumerate_demand_classes(instance: ProblemInstance,
                             method: str = "inclusion-exclusion") -> list[DemandClass]:
    """One class per nonempty distinct set with at most K files and positive weight.

    Classes are ordered by size, then lexicographically.
    """
    check_enumerable(instance)
    out = []
    for size in range(1, min(instance.n_files, instance.k_users) + 1):
        for files in itertools.combinations(range(instance.n_files), size):
            w = distinct_set_weight(instance, files, method=method)
            if w > 0.0:
                out.append(DemandClass(files, w))
    return out


def expected_distinct(instance: ProblemInstance) -> float:
    """E[number of distinct requested files] = sum_n 1 - (1 - p_n)^K."""
    return math.fsum(1.0 - (1.0 - p) ** instance.k_users for p in instance.popularity)
