"""Caching problem instance, file popularity and placement representation.

Indexing is zero-based throughout the library: files are ``0..N-1`` with file
0 the most popular, users are ``0..K-1``. The placement entry ``a[n, l]`` is
the size of each subfile of file ``n`` cached by a user subset of size ``l``,
as a fraction of the file size; ``a[n, 0]`` is the part kept only at the
server.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from mccs.errors import InvalidInstanceError, InvalidPlacementError

#: Absolute tolerance for every constraint check on solver output.
TOL = 1e-7
#: Tolerance on the popularity vector summing to one.
POPULARITY_SUM_TOL = 1e-12


@dataclass(frozen=True)
class ProblemInstance:
    """N files with popularity ``p``, K users, per-user cache of M files.

    ``popularity`` must already be sorted nonincreasing; use
    :func:`new_instance` to build one from an arbitrary ordering.
    ``permutation[i]`` is the caller's original index of sorted file ``i``.
    """

    n_files: int
    k_users: int
    cache_size: float
    popularity: tuple[float, ...]
    permutation: tuple[int, ...] = field(default=(), compare=False)

    def __post_init__(self):
        if not self.permutation:
            object.__setattr__(self, "permutation", tuple(range(self.n_files)))
        object.__setattr__(self, "popularity", tuple(float(x) for x in self.popularity))
        object.__setattr__(self, "cache_size", float(self.cache_size))
        _check_instance(self)

    @property
    def p(self) -> np.ndarray:
        return np.asarray(self.popularity, dtype=float)

    def with_cache(self, cache_size: float) -> "ProblemInstance":
        return ProblemInstance(self.n_files, self.k_users, cache_size,
                               self.popularity, self.permutation)


def _check_instance(inst: ProblemInstance) -> None:
    if not isinstance(inst.n_files, (int, np.integer)) or inst.n_files < 1:
        raise InvalidInstanceError(f"n_files must be a positive integer, got {inst.n_files!r}")
    if not isinstance(inst.k_users, (int, np.integer)) or inst.k_users < 1:
        raise InvalidInstanceError(f"k_users must be a positive integer, got {inst.k_users!r}")
    p = inst.popularity
    if len(p) != inst.n_files:
        raise InvalidInstanceError(
            f"popularity has {len(p)} entries but n_files={inst.n_files}")
    if any(not math.isfinite(x) for x in p):
        raise InvalidInstanceError("popularity entries must be finite")
    if min(p) < 0:
        raise InvalidInstanceError(f"negative probability {min(p)!r} in popularity")
    total = math.fsum(p)
    if abs(total - 1.0) > POPULARITY_SUM_TOL:
        raise InvalidInstanceError(f"popularity sums to {total!r}, expected 1")
    if any(p[i] < p[i + 1] for i in range(len(p) - 1)):
        raise InvalidInstanceError("popularity must be sorted nonincreasing")
    if sorted(inst.permutation) != list(range(inst.n_files)):
        raise InvalidInstanceError("permutation is not a permutation of the file indices")
    m = inst.cache_size
    if not math.isfinite(m) or m < 0 or m > inst.n_files:
        raise InvalidInstanceError(f"cache_size must lie in [0, {inst.n_files}], got {m!r}")


def new_instance(n_files: int, k_users: int, cache_size: float,
                 popularity: Sequence[float]) -> ProblemInstance:
    """Validate inputs and return an instance with popularity sorted nonincreasing.

    Ties keep their original relative order. The sort permutation is kept on
    the instance so results can be mapped back to the caller's labels.
    """
    p = [float(x) for x in popularity]
    if len(p) != n_files:
        raise InvalidInstanceError(f"popularity has {len(p)} entries but n_files={n_files}")
    order = sorted(range(len(p)), key=lambda i: -p[i])
    return ProblemInstance(n_files, k_users, cache_size,
                           tuple(p[i] for i in order), tuple(order))


def zipf_popularity(n_files: int, theta: float) -> np.ndarray:
    if n_files < 1:
        raise InvalidInstanceError("n_files must be at least 1")
    if theta < 0:
        raise InvalidInstanceError("Zipf exponent must be nonnegative")
    w = np.arange(1, n_files + 1, dtype=float) ** (-float(theta))
    return w / w.sum()


class Placement:
    """Read-only N x (K+1) matrix of subfile-size fractions."""

    __slots__ = ("_a",)

    def __init__(self, a: Any):
        arr = np.array(a, dtype=float)
        if arr.ndim != 2 or arr.shape[1] < 2:
            raise InvalidPlacementError(f"placement must be an N x (K+1) matrix, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise InvalidPlacementError("placement contains non-finite entries")
        arr.setflags(write=False)
        self._a = arr

    @property
    def a(self) -> np.ndarray:
        return self._a

    @property
    def n_files(self) -> int:
        return self._a.shape[0]

    @property
    def k_users(self) -> int:
        return self._a.shape[1] - 1

    def __getitem__(self, idx):
        return self._a[idx]

    def __eq__(self, other):
        return isinstance(other, Placement) and np.array_equal(self._a, other._a)

    def __hash__(self):
        return hash(self._a.tobytes())

    def __repr__(self):
        return f"Placement({self._a.tolist()!r})"

    def to_list(self) -> list[list[float]]:
        return self._a.tolist()

    @classmethod
    def uncached(cls, n_files: int, k_users: int) -> "Placement":
        """Nothing cached: every file stays whole at the server (M = 0)."""
        a = np.zeros((n_files, k_users + 1))
        a[:, 0] = 1.0
        return cls(a)

    @classmethod
    def full(cls, n_files: int, k_users: int) -> "Placement":
        """Every user caches every file (M = N)."""
        a = np.zeros((n_files, k_users + 1))
        a[:, k_users] = 1.0
        return cls(a)


def as_placement(placement: Placement | Any) -> Placement:
    return placement if isinstance(placement, Placement) else Placement(placement)


@dataclass(frozen=True)
class ValidationReport:
    partition_ok: tuple[bool, ...]
    cache_ok: bool
    nonneg_ok: bool
    popularity_first_ok: Optional[bool]  # None when not requested
    worst_violation: float
    tolerance: float = TOL

    @property
    def ok(self) -> bool:
        return (all(self.partition_ok) and self.cache_ok and self.nonneg_ok
                and self.popularity_first_ok is not False)

    def as_dict(self) -> dict:
        return {
            "ok": self.ok,
            "partition_ok": list(self.partition_ok),
            "cache_ok": self.cache_ok,
            "nonneg_ok": self.nonneg_ok,
            "popularity_first_ok": self.popularity_first_ok,
            "worst_violation": self.worst_violation,
        }


def _binom_row(k: int) -> np.ndarray:
    return np.array([math.comb(k, l) for l in range(k + 1)], dtype=float)


def cache_usage(placement: Placement) -> float:
    """Fraction of files (in units of file size) stored by each user."""
    a = as_placement(placement).a
    k = a.shape[1] - 1
    per_level = np.array([0.0] + [math.comb(k - 1, l - 1) for l in range(1, k + 1)])
    return float(np.sum(a @ per_level))


def check_shape(instance: ProblemInstance, placement: Placement) -> None:
    want = (instance.n_files, instance.k_users + 1)
    if placement.a.shape != want:
        raise InvalidPlacementError(f"placement shape {placement.a.shape} does not match instance {want}")


def validate_placement(instance: ProblemInstance, placement: Placement | Any,
                       check_popularity_first: bool = False,
                       tol: float = TOL) -> ValidationReport:
    """Check nonnegativity, the per-file partition equality, the cache budget
    and, optionally, the popularity-first ordering on cached levels 1..K."""
    placement = as_placement(placement)
    check_shape(instance, placement)
    a = placement.a
    k = instance.k_users

    neg = float(max(0.0, -a.min()))
    part_err = np.abs(a @ _binom_row(k) - 1.0)
    cache_err = max(0.0, cache_usage(placement) - instance.cache_size)
    violations = [neg, float(part_err.max()), cache_err]

    pf_ok = None
    if check_popularity_first:
        if instance.n_files > 1:
            pf_err = float(max(0.0, (a[1:, 1:] - a[:-1, 1:]).max()))
        else:
            pf_err = 0.0
        pf_ok = pf_err <= tol
        violations.append(pf_err)

    return ValidationReport(
        partition_ok=tuple(bool(e <= tol) for e in part_err),
        cache_ok=cache_err <= tol,
        nonneg_ok=neg <= tol,
        popularity_first_ok=pf_ok,
        worst_violation=max(violations),
        tolerance=tol,
    )


def is_popularity_first(placement: Placement, tol: float = TOL) -> bool:
    a = as_placement(placement).a
    if a.shape[0] < 2:
        return True
    return bool((a[1:, 1:] - a[:-1, 1:]).max() <= tol)


def require_valid(instance: ProblemInstance, placement: Placement | Any,
                  popularity_first: bool = False) -> Placement:
    """Return the placement as a :class:`Placement` or raise if it is invalid."""
    placement = as_placement(placement)
    report = validate_placement(instance, placement, check_popularity_first=popularity_first)
    if not report.ok:
        raise InvalidPlacementError(f"invalid placement: {report.as_dict()}")
    return placement


# -- JSON config --------------------------------------------------------------

def instance_from_dict(cfg: dict) -> ProblemInstance:
    """Build an instance from the JSON config schema.

    ``{"n_files": int, "k_users": int, "cache_size": float,
    "popularity": [float, ...] | {"zipf_theta": float}}``
    """
    try:
        n = cfg["n_files"]
        k = cfg["k_users"]
        m = cfg["cache_size"]
        pop = cfg["popularity"]
    except KeyError as exc:
        raise InvalidInstanceError(f"config missing key {exc.args[0]!r}") from None
    if isinstance(n, bool) or not isinstance(n, int):
        raise InvalidInstanceError("n_files must be an integer")
    if isinstance(k, bool) or not isinstance(k, int):
        raise InvalidInstanceError("k_users must be an integer")
    if isinstance(pop, dict):
        if "zipf_theta" not in pop:
            raise InvalidInstanceError("popularity object must contain 'zipf_theta'")
        pop = zipf_popularity(n, float(pop["zipf_theta"]))
    return new_instance(n, k, float(m), pop)


def load_instance(path: str | Path) -> ProblemInstance:
    with open(path) as fh:
        try:
            cfg = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidInstanceError(f"{path}: {exc}") from None
    return instance_from_dict(cfg)


def instance_to_dict(instance: ProblemInstance) -> dict:
    return {
        "n_files": instance.n_files,
        "k_users": instance.k_users,
        "cache_size": instance.cache_size,
        "popularity": list(instance.popularity),
    }
