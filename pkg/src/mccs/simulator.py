"""Bit-exact simulation of MCCS placement and delivery.

Files are Python ints holding ``F`` bits (bit ``i`` of the int is bit ``i`` of
the file). A subfile is a contiguous bit range of its file; shorter subfiles
in a coded message are zero-padded at the end, so every XOR aligns bit 0.
Decoding solves each user's received messages as a GF(2) linear system.
"""

from __future__ import annotations

import hashlib
import itertools
import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping, Optional, Sequence

import numpy as np

from mccs.combinatorics import members, non_redundant_subsets, subsets_of_size
from mccs.errors import QuantizationError
from mccs.model import Placement, ProblemInstance, as_placement

SubfileKey = tuple[int, int]  # (file, user-subset mask)

#: Direction search over floor/ceil per level is exhaustive up to this K.
EXHAUSTIVE_ROUNDING_K = 12


def default_file_bits(k_users: int) -> int:
    return 2 ** k_users * 1024


@dataclass(frozen=True)
class SubfileLayout:
    file_size_bits: int
    subfile_bits: np.ndarray  # s[n, l], read-only
    ranges: Mapping[SubfileKey, tuple[int, int]] = field(repr=False)  # (start, length)

    @property
    def n_files(self) -> int:
        return self.subfile_bits.shape[0]

    @property
    def k_users(self) -> int:
        return self.subfile_bits.shape[1] - 1

    def length(self, n: int, mask: int) -> int:
        return self.ranges[(n, mask)][1]

    def subfile(self, files: Sequence[int], n: int, mask: int) -> int:
        start, length = self.ranges[(n, mask)]
        return (files[n] >> start) & ((1 << length) - 1)


def _round_row(x: np.ndarray, f: int, k: int) -> np.ndarray:
    """Integer subfile sizes for one file, closest to ``x`` in max-norm, with
    the partition sum hitting ``f`` exactly through the server-only part."""
    weights = [math.comb(k, l) for l in range(k + 1)]
    lo = np.floor(x[1:]).astype(np.int64)
    frac_levels = [l for l in range(1, k + 1) if x[l] > lo[l - 1]]
    nearest = {l for l in frac_levels if x[l] - lo[l - 1] >= 0.5}

    def candidate(up: set[int]) -> np.ndarray:
        s = np.zeros(k + 1, dtype=np.int64)
        s[1:] = lo
        for l in up:
            s[l] += 1
        s[0] = f - sum(weights[l] * int(s[l]) for l in range(1, k + 1))
        return s

    if len(frac_levels) <= EXHAUSTIVE_ROUNDING_K:
        choices = (set(c) for r in range(len(frac_levels) + 1)
                   for c in itertools.combinations(frac_levels, r))
    else:
        choices = iter([nearest])
    best, best_key = candidate(nearest), None
    for up in choices:
        s = candidate(up)
        key = (s[0] < 0, float(np.abs(s - x).max()), sorted(up ^ nearest))
        if best_key is None or key < best_key:
            best, best_key = s, key
    return best


def _clamp_row(s: np.ndarray, k: int) -> np.ndarray:
    """Absorb a negative server-only part by shrinking the largest cached level."""
    s = s.copy()
    while s[0] < 0:
        deficit = -int(s[0])
        cached = s[1:]
        if cached.max() <= 0:
            raise QuantizationError("cannot absorb the rounding residue: no cached bits left")
        l = int(np.argmax(cached)) + 1
        w = math.comb(k, l)
        take = min(int(s[l]), -(-deficit // w))
        s[l] -= take
        s[0] += take * w
    return s


def quantize_placement(placement: Placement, file_size_bits: int) -> SubfileLayout:
    """Turn subfile fractions into integer bit counts and bit ranges.

    Each cached level is rounded to floor or ceil of ``a[n, l] * F``; the
    server-only part ``s[n, 0]`` takes whatever keeps
    ``sum_l C(K, l) s[n, l] == F``. Among the rounding choices the one with the
    smallest worst-case deviation from ``a * F`` is kept. If the server-only
    part would still go negative, it is clamped to zero and the overflow comes
    out of the largest cached level.
    """
    placement = as_placement(placement)
    a = np.clip(placement.a, 0.0, None)
    n_files, k = placement.n_files, placement.k_users
    f = int(file_size_bits)
    if f < 2 ** k:
        raise QuantizationError(f"file size {f} bits is below 2^K = {2 ** k}")
    s = np.zeros((n_files, k + 1), dtype=np.int64)
    for n in range(n_files):
        s[n] = _clamp_row(_round_row(a[n] * f, f, k), k)
        if s[n].min() < 0:
            raise QuantizationError(f"negative subfile size for file {n}")
    ranges: dict[SubfileKey, tuple[int, int]] = {}
    for n in range(n_files):
        pos = 0
        for l in range(k + 1):
            for mask in subsets_of_size(k, l):
                ranges[(n, mask)] = (pos, int(s[n, l]))
                pos += int(s[n, l])
        if pos != f:
            raise QuantizationError(f"file {n} partition covers {pos} of {f} bits")
    s.setflags(write=False)
    return SubfileLayout(f, s, MappingProxyType(ranges))


def make_files(n_files: int, file_size_bits: int, seed: int) -> tuple[int, ...]:
    """Deterministic pseudorandom file contents."""
    rng = np.random.default_rng(seed)
    nbytes = (file_size_bits + 7) // 8
    mask = (1 << file_size_bits) - 1
    return tuple(int.from_bytes(rng.bytes(nbytes), "little") & mask for _ in range(n_files))


@dataclass(frozen=True)
class UserCache:
    user: int
    subfiles: Mapping[SubfileKey, int] = field(repr=False)
    bits: int = 0


def build_caches(instance: ProblemInstance, layout: SubfileLayout,
                 files: Sequence[int]) -> tuple[UserCache, ...]:
    """User k stores W[n, S] for every file n and every subset S containing k."""
    k_users = instance.k_users
    caches = []
    for k in range(k_users):
        stored = {}
        bits = 0
        for (n, mask), (_, length) in layout.ranges.items():
            if mask >> k & 1:
                stored[(n, mask)] = layout.subfile(files, n, mask)
                bits += length
        caches.append(UserCache(k, MappingProxyType(stored), bits))
    return tuple(caches)


@dataclass(frozen=True)
class Message:
    subset: int
    bits: int
    payload: int = field(repr=False)


@dataclass(frozen=True)
class TransmissionLog:
    messages: tuple[Message, ...]
    total_bits: int

    def to_json(self, file_size_bits: int, seed: int,
                demand: Optional[Sequence[int]] = None) -> dict:
        """Export with one-based user labels."""
        out = {
            "messages": [{"subset": [u + 1 for u in members(m.subset)], "bits": m.bits}
                         for m in self.messages],
            "total_bits": self.total_bits,
            "F": file_size_bits,
            "seed": seed,
        }
        if demand is not None:
            out["demand"] = [n + 1 for n in demand]
        return out


def _components(d: Sequence[int], subset: int) -> list[SubfileKey]:
    return [(d[j], subset & ~(1 << j)) for j in members(subset)]


def deliver(instance: ProblemInstance, layout: SubfileLayout, files: Sequence[int],
            d: Sequence[int], leaders: Optional[int] = None) -> TransmissionLog:
    """Send C_S = XOR_{k in S} W[d_k, S minus k] for every non-redundant S.

    Zero-length messages are skipped.
    """
    d = tuple(d)
    if len(d) != instance.k_users:
        raise ValueError("demand length does not match K")
    msgs = []
    for s in non_redundant_subsets(d, leaders):
        comps = _components(d, s)
        bits = max(layout.length(n, m) for n, m in comps)
        if bits == 0:
            continue
        payload = 0
        for n, m in comps:
            payload ^= layout.subfile(files, n, m)
        msgs.append(Message(s, bits, payload))
    return TransmissionLog(tuple(msgs), sum(m.bits for m in msgs))


def simulated_rate(log: TransmissionLog, file_size_bits: int) -> float:
    return log.total_bits / file_size_bits


# -- decoding -----------------------------------------------------------------

def gf2_eliminate(rows: Sequence[tuple[int, int]]) -> tuple[dict[int, tuple[int, int]], bool]:
    """Reduced row echelon form over GF(2).

    Each row is ``(coefficient_mask, rhs)`` where ``rhs`` is an int whose bits
    are independent right-hand sides sharing the same coefficients. Returns
    the pivot rows keyed by pivot column and whether any row reduced to
    ``0 = nonzero``.
    """
    pivots: dict[int, tuple[int, int]] = {}
    inconsistent = False
    for mask, rhs in rows:
        for col, (pm, pr) in pivots.items():
            if mask >> col & 1:
                mask ^= pm
                rhs ^= pr
        if mask == 0:
            if rhs:
                inconsistent = True
            continue
        col = (mask & -mask).bit_length() - 1
        for c2, (pm, pr) in list(pivots.items()):
            if pm >> col & 1:
                pivots[c2] = (pm ^ mask, pr ^ rhs)
        pivots[col] = (mask, rhs)
    return pivots, inconsistent


@dataclass(frozen=True)
class DecodeReport:
    success: tuple[bool, ...]
    recovered_hash: tuple[str, ...]
    residual_unknown: tuple[int, ...]
    diagnostics: tuple[str, ...] = ()

    @property
    def all_ok(self) -> bool:
        return all(self.success)


def _bits_hash(value: int, n_bits: int) -> str:
    return hashlib.sha256(value.to_bytes((n_bits + 7) // 8, "little")).hexdigest()


def _decode_user(k: int, d: tuple[int, ...], layout: SubfileLayout, cache: UserCache,
                 log: TransmissionLog) -> tuple[Optional[int], int, list[str]]:
    unknown: dict[SubfileKey, int] = {}
    equations = []  # (payload xor known parts, bits, unknown keys)
    for msg in log.messages:
        rhs = msg.payload
        keys = []
        for key in _components(d, msg.subset):
            if key[1] >> k & 1:
                rhs ^= cache.subfiles[key]
            elif layout.length(*key) > 0:
                unknown.setdefault(key, len(unknown))
                keys.append(key)
        equations.append((rhs, msg.bits, keys))

    cuts = sorted({0} | {layout.length(*key) for key in unknown} | {m.bits for m in log.messages})
    values = dict.fromkeys(unknown, 0)
    undetermined: set[SubfileKey] = set()
    residual = 0
    notes = []
    for lo, hi in zip(cuts, cuts[1:]):
        width_mask = (1 << (hi - lo)) - 1
        rows = []
        for rhs, bits, keys in equations:
            if bits <= lo:
                continue
            coef = 0
            for key in keys:
                if layout.length(*key) > lo:
                    coef |= 1 << unknown[key]
            rows.append((coef, (rhs >> lo) & width_mask))
        pivots, bad = gf2_eliminate(rows)
        if bad:
            notes.append(f"user {k}: inconsistent equations on bits [{lo}, {hi})")
        for key, idx in unknown.items():
            if layout.length(*key) <= lo:
                continue
            row = pivots.get(idx)
            if row is not None and row[0] == 1 << idx:
                values[key] |= row[1] << lo
            else:
                undetermined.add(key)
                residual += hi - lo

    want = d[k]
    recovered = 0
    for mask in range(1 << layout.k_users):
        start, length = layout.ranges[(want, mask)]
        if length == 0:
            continue
        key = (want, mask)
        if mask >> k & 1:
            part = cache.subfiles[key]
        elif key in values and key not in undetermined:
            part = values[key]
        else:
            notes.append(f"user {k}: subfile W[{want}, {sorted(members(mask))}] not recoverable")
            return None, residual, notes
        recovered |= part << start
    return recovered, residual, notes


def decode_and_verify(instance: ProblemInstance, layout: SubfileLayout,
                      caches: Sequence[UserCache], log: TransmissionLog,
                      d: Sequence[int], files: Sequence[int]) -> DecodeReport:
    """Decode every user's request from the broadcast and its cache and
    compare bit for bit against the source file."""
    d = tuple(d)
    f = layout.file_size_bits
    ok, hashes, residual, notes = [], [], [], []
    for k in range(instance.k_users):
        value, res, msgs = _decode_user(k, d, layout, caches[k], log)
        notes.extend(msgs)
        residual.append(res)
        if value is None:
            ok.append(False)
            hashes.append("")
            continue
        hashes.append(_bits_hash(value, f))
        match = value == files[d[k]]
        if not match:
            notes.append(f"user {k}: recovered bits differ from file {d[k]}")
        ok.append(match)
    return DecodeReport(tuple(ok), tuple(hashes), tuple(residual), tuple(notes))


@dataclass(frozen=True)
class DemandCheck:
    demand: tuple[int, ...]
    decoded: bool
    simulated_rate: float
    analytic_rate: float
    messages: int

    @property
    def deviation(self) -> float:
        return abs(self.simulated_rate - self.analytic_rate)


def check_demand(instance: ProblemInstance, placement: Placement, layout: SubfileLayout,
                 files: Sequence[int], caches: Sequence[UserCache],
                 d: Sequence[int]) -> DemandCheck:
    from mccs.rates import rate_mccs

    log = deliver(instance, layout, files, d)
    report = decode_and_verify(instance, layout, caches, log, d, files)
    analytic = rate_mccs(instance, placement, d).total
    # count every non-redundant subset: a message may quantize to zero bits
    return DemandCheck(tuple(d), report.all_ok, simulated_rate(log, layout.file_size_bits),
                       analytic, len(non_redundant_subsets(d)))
