import math

import numpy as np
import pytest

from mccs.model import Placement

_CRITERIA: list[str] = []


def random_q_placement(rng: np.random.Generator, n_files: int, k_users: int,
                       sparsity: float = 0.3) -> Placement:
    """Random popularity-first placement satisfying the partition equalities.

    Cached levels are sorted down the files, some tails are zeroed to create
    unequal subfile sizes, and one common scale keeps a[n, 0] >= 0.
    """
    u = -np.sort(-rng.random((n_files, k_users)), axis=0)
    for l in range(k_users):
        if rng.random() < sparsity:
            u[rng.integers(0, n_files + 1):, l] = 0.0
    w = np.array([math.comb(k_users, l) for l in range(1, k_users + 1)], dtype=float)
    total = (u * w).sum(axis=1).max()
    if total > 0:
        u *= rng.uniform(0.2, 1.0) / total
    a = np.zeros((n_files, k_users + 1))
    a[:, 1:] = u
    a[:, 0] = 1.0 - (u * w).sum(axis=1)
    return Placement(a)


def random_placement(rng: np.random.Generator, n_files: int, k_users: int) -> Placement:
    """Random placement with no ordering across files."""
    w = np.array([math.comb(k_users, l) for l in range(k_users + 1)], dtype=float)
    raw = rng.random((n_files, k_users + 1)) * (rng.random((n_files, k_users + 1)) < 0.7)
    raw[:, 0] += 1e-3
    return Placement(raw / (raw @ w)[:, None])


def random_popularity(rng: np.random.Generator, n_files: int) -> np.ndarray:
    p = -np.sort(-rng.random(n_files))
    return p / p.sum()


@pytest.fixture
def rng():
    return np.random.default_rng(20201018)


@pytest.fixture
def criterion():
    """Record one pass/fail line per acceptance criterion."""
    def record(label: str, passed: bool, detail: str = "") -> bool:
        line = f"[{'PASS' if passed else 'FAIL'}] {label}" + (f" | {detail}" if detail else "")
        _CRITERIA.append(line)
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA:
            terminalreporter.write_line(line)
