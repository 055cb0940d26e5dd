import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mccs.combinatorics import distinct_set, leader_groups, mask_of, members
from mccs.errors import InvalidInstanceError, InvalidPlacementError
from mccs.model import Placement, new_instance, zipf_popularity
from mccs.rates import (
    avg_rate_distinct,
    avg_rate_lb,
    avg_rate_mccs,
    padded_subsets,
    rate_lb,
    rate_lb_popfirst,
    rate_mccs,
    rate_mccs_grouped,
    region,
)

from conftest import random_placement, random_popularity, random_q_placement

HALF = Placement([[0, 0.5, 0], [0, 0.5, 0]])
P2 = new_instance(2, 2, 1.0, [0.6, 0.4])

seeds = st.integers(0, 2 ** 32 - 1)


def brute_rate(a, d):
    """Independent per-demand load: scan all 2^K subsets, keep those touching
    the first requester of each distinct file."""
    k = len(d)
    first = {}
    for u, n in enumerate(d):
        first.setdefault(n, u)
    leaders = set(first.values())
    total = 0.0
    for s in range(1, 1 << k):
        users = [u for u in range(k) if s >> u & 1]
        if leaders & set(users):
            total += max(a[d[u], len(users) - 1] for u in users)
    return total


def test_rate_mccs_examples():
    assert rate_mccs(P2, HALF, (0, 1)).total == pytest.approx(0.5)
    assert rate_mccs(P2, HALF, (0, 0)).total == pytest.approx(0.5)
    assert rate_mccs(P2, HALF, (0, 1)).per_subset_size == (0.0, 0.5)
    full = Placement.full(2, 2)
    assert rate_mccs(new_instance(2, 2, 2.0, [0.6, 0.4]), full, (1, 0)).total == 0.0


def test_rate_mccs_rejects_bad_input():
    with pytest.raises(InvalidPlacementError):
        rate_mccs(P2, [[0.5, 0.5, 0], [1, 0, 0]], (0, 1))
    with pytest.raises(ValueError):
        rate_mccs(P2, HALF, (0, 2))
    with pytest.raises(ValueError):
        rate_mccs(P2, HALF, (0,))


def test_rate_mccs_matches_brute_force(rng):
    for n, k in [(2, 3), (3, 3), (4, 2), (2, 4)]:
        inst = new_instance(n, k, float(n), random_popularity(rng, n))
        pl = random_placement(rng, n, k)
        for d in itertools.product(range(n), repeat=k):
            assert rate_mccs(inst, pl, d).total == pytest.approx(brute_rate(pl.a, d), abs=1e-13)


def test_grouped_example_k3(rng):
    inst = new_instance(2, 3, 2.0, [0.6, 0.4])
    for _ in range(20):
        a = random_q_placement(rng, 2, 3).a
        want = a[0, 0] + a[1, 0] + 3 * a[0, 1] + a[0, 2]
        assert rate_mccs_grouped(inst, a, (0, 0, 1)).total == pytest.approx(want, abs=1e-14)


def test_grouped_single_file_demand(rng):
    inst = new_instance(3, 4, 3.0, [0.5, 0.3, 0.2])
    a = random_q_placement(rng, 3, 4).a
    for n in range(3):
        want = sum(math.comb(3, l) * a[n, l] for l in range(4))
        assert rate_mccs_grouped(inst, a, (n,) * 4).total == pytest.approx(want, abs=1e-14)


def test_grouped_requires_q():
    with pytest.raises(InvalidPlacementError):
        rate_mccs_grouped(P2, [[0.6, 0.2, 0.0], [0.4, 0.3, 0.0]], (0, 1))


@pytest.mark.parametrize("n,k", [(n, k) for n in range(1, 5) for k in range(1, 5)])
def test_regrouping_identity_exhaustive(n, k):
    rng = np.random.default_rng(1000 * n + k)
    inst = new_instance(n, k, float(n), random_popularity(rng, n))
    for _ in range(3):
        pl = random_q_placement(rng, n, k)
        for d in itertools.product(range(n), repeat=k):
            flat = rate_mccs(inst, pl, d).total
            grouped = rate_mccs_grouped(inst, pl, d).total
            assert abs(flat - grouped) <= 1e-12


def test_rate_lb_examples():
    assert rate_lb(P2, HALF, {0, 1}) == pytest.approx(0.5)
    inst = new_instance(3, 3, 3.0, [0.5, 0.3, 0.2])
    a = np.array([[0.1, 0.2, 0.1, 0.0], [0.4, 0.1, 0.1, 0.0], [1.0, 0, 0, 0]])
    assert rate_lb(inst, a, {1}) == pytest.approx(0.4 + 2 * 0.1 + 0.1)
    assert rate_lb(inst, Placement.full(3, 3), {0, 2}) == 0.0


def test_rate_lb_popfirst_k3_expansion(rng):
    inst = new_instance(3, 3, 3.0, [0.5, 0.3, 0.2])
    for _ in range(20):
        a = random_q_placement(rng, 3, 3).a
        want = a[0, 0] + 2 * a[0, 1] + a[0, 2] + a[1, 0] + a[1, 1]
        assert rate_lb_popfirst(inst, a, {0, 1}) == pytest.approx(want, abs=1e-14)
        assert rate_lb_popfirst(inst, a, {2}) == pytest.approx(rate_lb(inst, a, {2}), abs=1e-14)


def test_rate_lb_maximizes_over_orders():
    # outside Q the natural order is not the maximizer
    inst = new_instance(2, 2, 2.0, [0.6, 0.4])
    a = [[0.6, 0.2, 0.0], [0.0, 0.4, 0.2]]
    # orders: (0,1): .6+.2+0 = .8 ; (1,0): 0+.4+.6 = 1.0
    assert rate_lb(inst, a, {0, 1}) == pytest.approx(1.0)


def test_rate_lb_rejects():
    with pytest.raises(ValueError):
        rate_lb(P2, HALF, set())
    with pytest.raises(ValueError):
        rate_lb(P2, HALF, {0, 1, 2})


@settings(max_examples=100, deadline=None)
@given(seed=seeds, n=st.integers(1, 5), k=st.integers(1, 4))
def test_rearrangement_identity(seed, n, k):
    rng = np.random.default_rng(seed)
    inst = new_instance(n, k, float(n), random_popularity(rng, n))
    pl = random_q_placement(rng, n, k)
    for size in range(1, min(n, k) + 1):
        for files in itertools.combinations(range(n), size):
            assert rate_lb(inst, pl, files) == pytest.approx(rate_lb_popfirst(inst, pl, files), abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(seed=seeds, n=st.integers(1, 4), k=st.integers(1, 4))
def test_dominance_and_region_equalities(seed, n, k):
    rng = np.random.default_rng(seed)
    inst = new_instance(n, k, float(n), random_popularity(rng, n))
    pl = random_q_placement(rng, n, k)
    for d in itertools.product(range(n), repeat=k):
        r = rate_mccs(inst, pl, d).total
        lb = rate_lb(inst, pl, distinct_set(d))
        assert r >= lb - 1e-12
        nd = len(set(d))
        if k <= 2 or nd == k or nd == 1:
            assert r == pytest.approx(lb, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(seed=seeds)
def test_gap_formula_k3(seed):
    rng = np.random.default_rng(seed)
    inst = new_instance(2, 3, 2.0, random_popularity(rng, 2))
    a = random_q_placement(rng, 2, 3).a
    gap = rate_mccs(inst, a, (0, 0, 1)).total - rate_lb(inst, a, {0, 1})
    assert gap == pytest.approx(a[0, 1] - a[1, 1], abs=1e-12)


def test_padded_subsets_k3():
    inst = new_instance(2, 3, 2.0, [0.6, 0.4])
    a = np.array([[0.1, 0.2, 0.1, 0.0], [0.4, 0.1, 0.1, 0.0]])
    # users 0 and 1 want file 0, user 2 wants file 1; {1, 2} pads to a[0, 1]
    assert padded_subsets(inst, a, (0, 0, 1)) == [(mask_of([1, 2]), pytest.approx(0.1))]
    assert padded_subsets(inst, a, (0, 1, 1)) == []


@pytest.mark.parametrize("d", [(0, 1, 0, 1), (0, 0, 1, 2), (2, 0, 2, 2)])
def test_leader_choice_invariance(rng, d):
    inst = new_instance(3, 4, 3.0, [0.5, 0.3, 0.2])
    pl = random_q_placement(rng, 3, 4)
    totals = {round(rate_mccs(inst, pl, d, u).total, 12) for u in leader_groups(d)}
    assert len(totals) == 1


def test_avg_rate_examples():
    m0 = Placement.uncached(2, 2)
    assert avg_rate_mccs(P2, m0) == pytest.approx(1.48, abs=1e-15)
    assert avg_rate_lb(P2, m0) == pytest.approx(1.48, abs=1e-15)
    assert avg_rate_mccs(P2, HALF) == pytest.approx(0.5)
    assert avg_rate_lb(P2, HALF) == pytest.approx(0.5)
    assert avg_rate_lb(P2, HALF, popfirst=True) == pytest.approx(0.5)
    full, big = Placement.full(2, 2), P2.with_cache(2.0)
    assert avg_rate_mccs(big, full) == 0.0 and avg_rate_lb(big, full) == 0.0


def test_avg_rate_matches_weighted_sum(rng):
    inst = new_instance(3, 3, 3.0, random_popularity(rng, 3))
    pl = random_placement(rng, 3, 3)
    p = np.array(inst.popularity)
    brute = math.fsum(float(np.prod(p[list(d)])) * brute_rate(pl.a, d)
                      for d in itertools.product(range(3), repeat=3))
    assert avg_rate_mccs(inst, pl) == pytest.approx(brute, abs=1e-13)


def test_avg_rate_distinct():
    assert avg_rate_distinct(P2, HALF) == pytest.approx(0.5)
    with pytest.raises(InvalidInstanceError):
        avg_rate_distinct(new_instance(2, 3, 1.0, [0.6, 0.4]), Placement.uncached(2, 3))
    with pytest.raises(ValueError):
        avg_rate_distinct(P2, HALF, which="both")


@settings(max_examples=30, deadline=None)
@given(seed=seeds, k=st.integers(2, 4), extra=st.integers(0, 1))
def test_distinct_average_mccs_equals_lb(seed, k, extra):
    rng = np.random.default_rng(seed)
    n = k + extra
    inst = new_instance(n, k, float(n), random_popularity(rng, n))
    pl = random_q_placement(rng, n, k)
    assert avg_rate_distinct(inst, pl, "mccs") == pytest.approx(avg_rate_distinct(inst, pl, "lb"), abs=1e-12)


def test_distinct_average_uniform_symmetric():
    inst = new_instance(3, 3, 1.0, zipf_popularity(3, 0))
    row = [0.25, 0.25, 0.0, 0.0]    # 0.25 + 3 * 0.25 = 1
    pl = Placement([row] * 3)
    # every all-distinct demand has the same load, so the conditional mean is it
    assert avg_rate_distinct(inst, pl) == pytest.approx(rate_mccs(inst, pl, (0, 1, 2)).total)


@pytest.mark.parametrize("k,nd,want", [(1, 1, 1), (2, 1, 1), (2, 2, 1), (3, 3, 2), (4, 4, 2), (4, 3, 3), (3, 1, 3)])
def test_region(k, nd, want):
    assert region(k, nd) == want
