import math

import numpy as np
import pytest

from clusterkit.core import DistanceMatrix, Partition, PartitionError, pairwise_distances, quality
from clusterkit.generators import generate_euclidean, generate_pseudo, generate_two_valued
from clusterkit.separability import (
    OracleCapError,
    brute_force_optimal,
    count_partitions,
    enumerate_partitions,
    is_residually_separable,
    is_variationally_separable,
)
from clusterkit.transforms import scale, shift_squared

from conftest import random_matrix


def brute_set_partitions(items):
    # textbook recursion: first element joins an existing block or opens one
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for smaller in brute_set_partitions(rest):
        for i in range(len(smaller)):
            yield smaller[:i] + [[first] + smaller[i]] + smaller[i + 1 :]
        yield [[first]] + smaller


def test_variational_four_point(four_point):
    d, g = four_point
    cert = is_variationally_separable(d, g)
    assert cert.valid
    assert cert.threshold == pytest.approx(1.41421356, abs=1e-8)
    assert cert.min_inter == 10.0


def test_variational_fails_when_gap_small():
    d, g = generate_two_valued([2, 2], 1.0, 1.2)
    assert not is_variationally_separable(d, g).valid


def test_residual_examples(four_point):
    d, g = four_point
    cert = is_residually_separable(d, g)
    assert cert.valid and cert.threshold == pytest.approx(math.sqrt(2))
    for gap, expected in [(1.4, False), (1.5, True)]:
        d6, g6 = generate_two_valued([2, 2, 2], 1.0, gap)
        cert = is_residually_separable(d6, g6)
        assert cert.beta_value == pytest.approx(1.0)
        assert cert.valid is expected


@pytest.mark.parametrize("delta", [0.1, 1.0, 100.0])
def test_residual_shift_survival_condition(delta):
    # beta grows by delta, so the squared threshold 2*beta grows by 2*delta
    # while squared inter distances grow by delta: survival <=> inter^2 > 2 beta + delta
    for seed in range(30):
        d, g = generate_pseudo([3, 3, 2], rng=seed, criterion="residual")
        before = is_residually_separable(d, g)
        after = is_residually_separable(shift_squared(d, delta), g)
        predicted = before.min_inter**2 > (2 * before.beta_value + delta) * (1 + 1e-9) ** 2
        assert after.valid == predicted


def test_residual_survives_small_shift():
    for seed in range(30):
        d, g = generate_pseudo([3, 3, 2], rng=seed, criterion="residual")
        for delta in (0.1, 1.0):
            assert is_residually_separable(shift_squared(d, delta), g).valid


def test_residual_lost_under_large_shift():
    # pinned counterexample: certified before, refused after a shift of 100
    d, g = generate_pseudo([3, 3, 2], rng=4, criterion="residual")
    assert is_residually_separable(d, g).valid
    after = is_residually_separable(shift_squared(d, 100.0), g)
    assert not after.valid
    assert after.min_inter**2 < 2 * after.beta_value


def test_certificates_need_two_clusters(four_point):
    d, _ = four_point
    one = Partition(((0, 1, 2, 3),))
    with pytest.raises(PartitionError):
        is_variationally_separable(d, one)
    with pytest.raises(PartitionError):
        is_residually_separable(d, one)


def test_knife_edge_is_not_certified():
    # inter distance equal to the threshold is refused by the strict test
    d, g = generate_two_valued([2, 2], 1.0, math.sqrt(2) * (1 + 1e-12))
    assert not is_variationally_separable(d, g).valid


@pytest.mark.parametrize("alpha", [1e-6, 1.0, 1e6])
def test_verdicts_scale_invariant(alpha):
    cases = [generate_two_valued([2, 3, 3], 1.0, gap) for gap in (1.2, 1.5, 2.0, 2.3, 2.5, 4.0)]
    cases += [generate_pseudo([2, 3, 3], rng=s, criterion="residual") for s in range(10)]
    verdicts = set()
    for d, g in cases:
        for check in (is_variationally_separable, is_residually_separable):
            v = check(d, g).valid
            verdicts.add(v)
            assert check(scale(d, alpha), g).valid == v
    assert verdicts == {True, False}


def test_exactly_one_criterion_can_hold():
    # residual only: near-uniform intra distances
    d, g = generate_two_valued([3, 3], 1.0, 2.0)
    assert is_residually_separable(d, g).valid and not is_variationally_separable(d, g).valid
    # variational only: beta > Q happens when Q > (n-k-1) sigma^2
    d = pairwise_distances(np.array([0.0, 0.01, 5.0, 5.01, 20.0, 24.0]))
    g = Partition(((0, 1), (2, 3), (4, 5)))
    var, res = is_variationally_separable(d, g), is_residually_separable(d, g)
    assert var.beta_value > var.q_value
    assert var.valid and not res.valid


def test_enumerate_examples():
    parts = list(enumerate_partitions(4, 2, 2))
    assert parts == [
        Partition(((0, 1), (2, 3))),
        Partition(((0, 2), (1, 3))),
        Partition(((0, 3), (1, 2))),
    ]
    assert len(list(enumerate_partitions(4, 2, 1))) == 7
    assert list(enumerate_partitions(4, 3, 2)) == []
    with pytest.raises(OracleCapError):
        list(enumerate_partitions(15, 2, 2))


@pytest.mark.parametrize("n", range(1, 11))
def test_enumeration_counts_match_recursive_formula(n):
    for k in range(1, 5):
        for m in (1, 2, 3):
            assert len(list(enumerate_partitions(n, k, m))) == count_partitions(n, k, m)


@pytest.mark.parametrize("n", range(1, 8))
def test_enumeration_matches_brute_force_set(n):
    for k in range(1, 4):
        for m in (1, 2):
            expected = {
                Partition(tuple(tuple(b) for b in p), min_size=1)
                for p in brute_set_partitions(list(range(n)))
                if len(p) == k and min(len(b) for b in p) >= m
            }
            got = list(enumerate_partitions(n, k, m))
            assert len(got) == len(set(got))
            assert set(got) == expected


def test_stirling_numbers():
    # S(n, k) via the explicit inclusion-exclusion sum
    def stirling(n, k):
        return sum((-1) ** j * math.comb(k, j) * (k - j) ** n for j in range(k + 1)) // math.factorial(k)

    for n in range(1, 11):
        for k in range(1, 5):
            assert count_partitions(n, k, 1) == stirling(n, k)


def test_oracle_four_point(four_point):
    d, g = four_point
    res = brute_force_optimal(d, 2, 2)
    assert res.best_partition == g
    assert res.best_value == 1.0
    assert res.unique
    assert res.partitions_examined == 3


def test_oracle_ties_not_unique():
    d = DistanceMatrix(1 - np.eye(6))
    res = brute_force_optimal(d, 2, 2)
    assert not res.unique
    assert res.best_partition == next(iter(enumerate_partitions(6, 2, 2)))


def test_oracle_value_is_minimum_of_quality():
    rng = np.random.default_rng(9)
    d = random_matrix(rng, 7)
    res = brute_force_optimal(d, 3, 2)
    values = [quality(d, p) for p in enumerate_partitions(7, 3, 2)]
    assert res.best_value == pytest.approx(min(values), rel=1e-12)
    assert quality(d, res.best_partition) == pytest.approx(min(values), rel=1e-12)


def test_oracle_cap():
    with pytest.raises(OracleCapError):
        brute_force_optimal(random_matrix(np.random.default_rng(0), 15), 2, 2)
    with pytest.raises(ValueError):
        brute_force_optimal(random_matrix(np.random.default_rng(0), 5), 3, 2)


def test_oracle_finds_planted_variational():
    for seed in range(10):
        data, g, cert = generate_euclidean([2, 3, 3], 2, 1.0, 1.05, seed)
        assert cert.valid
        assert brute_force_optimal(data.distances(), 3, 2).best_partition == g


def test_oracle_finds_planted_residual():
    for seed in range(10):
        d, g = generate_pseudo([3, 2, 4], rng=seed, criterion="residual", gap_margin=1.001)
        res = brute_force_optimal(d, 3, 2)
        assert res.best_partition == g and res.unique
