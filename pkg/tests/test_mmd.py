"""Tests for the domain-distance weights and their brute-force oracles."""

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from miadapt.model import Coefficients, Dataset, ReportSet, UserBag
from miadapt.mmd import (
    MmdWeights,
    PartitionPlan,
    brute_force_mmd,
    cross_domain_weights,
    mmd_distance,
    mmd_weights,
    partition,
    representative_rows,
    within_domain_weights,
)

from conftest import make_bag, make_vocabulary, random_coefficients


def single_chunk_plan(n_reports, n_users):
    return partition(n_reports, list(range(n_users)), 1, seed=0)


def reports_of(rows):
    return ReportSet(np.asarray(rows, dtype=np.int64))


def naive_cross(reports, selected):
    """O(r * n_p * width) per-keyword mean squared difference."""
    r, width = reports.shape
    n_p = selected.shape[0]
    out = np.zeros(width)
    for i in range(r):
        for u in range(n_p):
            for j in range(width):
                out[j] += (reports[i, j] - selected[u, j]) ** 2
    return out / (r * n_p)


def naive_within(selected):
    n_p, width = selected.shape
    out = np.zeros(width)
    for u1 in range(n_p):
        for u2 in range(n_p):
            for j in range(width):
                out[j] += (selected[u1, j] - selected[u2, j]) ** 2
    return out / (n_p * n_p)


class TestPartition:
    def test_single_chunk_holds_everything(self):
        plan = partition(4, ["a", "b", "c"], 1, seed=5)
        assert len(plan.report_chunks) == 1
        assert_array_equal(plan.report_chunks[0], [0, 1, 2, 3])
        assert_array_equal(plan.user_chunks[0], [0, 1, 2])

    def test_hundred_chunks_of_twenty_five(self):
        plan = partition(2500, list(range(300)), 100, seed=1)
        assert len(plan.report_chunks) == 100
        assert all(len(c) == 25 for c in plan.report_chunks)
        assert all(len(c) == 3 for c in plan.user_chunks)

    def test_chunks_disjoint_and_cover(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            n_reports = int(rng.integers(0, 40))
            n_users = int(rng.integers(1, 40))
            chunks = int(rng.integers(1, 12))
            plan = partition(n_reports, list(range(n_users)), chunks, seed=int(rng.integers(1000)))
            flat_r = np.concatenate([np.asarray(c) for c in plan.report_chunks]) if plan.report_chunks else np.array([])
            flat_u = np.concatenate([np.asarray(c) for c in plan.user_chunks])
            assert sorted(flat_r.tolist()) == list(range(n_reports))
            assert sorted(flat_u.tolist()) == list(range(n_users))
            sizes_r = [len(c) for c in plan.report_chunks]
            sizes_u = [len(c) for c in plan.user_chunks]
            if sizes_r:
                assert max(sizes_r) - min(sizes_r) <= 1
            assert max(sizes_u) - min(sizes_u) <= 1

    def test_same_seed_reproduces_plan(self):
        first = partition(30, list(range(12)), 4, seed=9)
        second = partition(30, list(range(12)), 4, seed=9)
        for a, b in zip(first.report_chunks, second.report_chunks):
            assert_array_equal(a, b)
        for a, b in zip(first.user_chunks, second.user_chunks):
            assert_array_equal(a, b)

    def test_different_seeds_vary(self):
        layouts = set()
        for seed in range(20):
            plan = partition(10, list(range(6)), 3, seed=seed)
            layouts.add(tuple(tuple(np.asarray(c).tolist()) for c in plan.report_chunks))
        assert len(layouts) > 1


class TestRepresentativeRows:
    def test_single_tweet_users(self):
        vocabulary = make_vocabulary(2)
        bags = (
            make_bag("u0", [[1, 0]], 1),
            make_bag("u1", [[0, 5]], 0),
            make_bag("u2", [[2, 2]], 1),
        )
        data = Dataset(vocabulary, bags, reports_of([[0, 0]]))
        rows = representative_rows(data, Coefficients(np.array([0.3, -1.0, 2.0])))
        assert_array_equal(rows, [[1, 0], [2, 2]])

    def test_zero_coefficients_take_first_rows(self):
        vocabulary = make_vocabulary(2)
        bags = (make_bag("u0", [[4, 4], [9, 9]], 1),)
        data = Dataset(vocabulary, bags, reports_of([[0, 0]]))
        rows = representative_rows(data, Coefficients(np.zeros(3)))
        assert_array_equal(rows, [[4, 4]])

    def test_hand_built_argmax(self):
        # scores with coef (0, 1, -1): u0 rows 2-0=2, 0-3=-3 -> row 0;
        # u2 rows 1-1=0, 5-1=4 -> row 1
        vocabulary = make_vocabulary(2)
        bags = (
            make_bag("u0", [[2, 0], [0, 3]], 1),
            make_bag("u1", [[8, 8]], 0),
            make_bag("u2", [[1, 1], [5, 1]], 1),
        )
        data = Dataset(vocabulary, bags, reports_of([[0, 0]]))
        rows = representative_rows(data, Coefficients(np.array([0.0, 1.0, -1.0])))
        assert_array_equal(rows, [[2, 0], [5, 1]])


class TestCrossDomainWeights:
    def test_identical_points_zero(self):
        value = cross_domain_weights(
            reports_of([[1]]), np.array([[1.0]]), single_chunk_plan(1, 1)
        )
        assert_array_equal(value, [0.0])

    def test_two_reports_one_user(self):
        value = cross_domain_weights(
            reports_of([[0], [2]]), np.array([[1.0]]), single_chunk_plan(2, 1)
        )
        assert_allclose(value, [1.0], rtol=0, atol=0)

    def test_matches_pairwise_loop(self):
        rng = np.random.default_rng(21)
        for _ in range(10):
            r = int(rng.integers(1, 8))
            n_p = int(rng.integers(1, 8))
            width = int(rng.integers(1, 5))
            reports = rng.poisson(2.0, size=(r, width))
            selected = rng.poisson(2.0, size=(n_p, width)).astype(float)
            value = cross_domain_weights(
                ReportSet(reports), selected, single_chunk_plan(r, n_p)
            )
            assert_allclose(value, naive_cross(reports, selected), rtol=0, atol=1e-10)

    def test_empty_side_gives_zeros(self):
        plan = single_chunk_plan(1, 1)
        zero = cross_domain_weights(reports_of(np.zeros((0, 3), dtype=np.int64)), np.zeros((2, 3)), plan)
        assert_array_equal(zero, np.zeros(3))


class TestWithinDomainWeights:
    def test_identical_rows_zero(self):
        value = within_domain_weights(np.array([[1.0], [1.0]]), single_chunk_plan(1, 2))
        assert_array_equal(value, [0.0])

    def test_two_distinct_rows(self):
        # pairwise squared differences (0, 4, 4, 0) / 4
        value = within_domain_weights(np.array([[0.0], [2.0]]), single_chunk_plan(1, 2))
        assert_allclose(value, [2.0], rtol=0, atol=0)

    def test_single_row_zero(self):
        value = within_domain_weights(np.array([[3.0, 7.0]]), single_chunk_plan(1, 1))
        assert_array_equal(value, [0.0, 0.0])

    def test_linear_identity_matches_pairwise_sum(self):
        rng = np.random.default_rng(23)
        for _ in range(100):
            n = int(rng.integers(1, 201))
            width = int(rng.integers(1, 4))
            selected = rng.poisson(3.0, size=(n, width)).astype(float)
            value = within_domain_weights(selected, single_chunk_plan(1, n))
            assert_allclose(value, naive_within(selected), rtol=0, atol=1e-10)


class TestMmdDistance:
    def test_zero_coefficients(self):
        weights = MmdWeights(np.array([1.0, 2.0]), np.array([0.5, 0.0]), 2, 3)
        assert mmd_distance(Coefficients(np.zeros(3)), weights) == 0.0

    def test_single_user_quadratic(self):
        weights = MmdWeights(np.array([1.0]), np.array([0.0]), 1, 2)
        value = mmd_distance(Coefficients(np.array([0.0, 3.0])), weights)
        assert_allclose(value, 18.0, rtol=0, atol=0)

    def test_agrees_with_brute_force(self):
        rng = np.random.default_rng(29)
        for _ in range(50):
            r = int(rng.integers(1, 51))
            n_p = int(rng.integers(1, 51))
            width = int(rng.integers(1, 21))
            reports = ReportSet(rng.poisson(1.5, size=(r, width)))
            selected = rng.poisson(1.5, size=(n_p, width)).astype(float)
            coef = random_coefficients(rng, width)
            weights = mmd_weights(reports, selected, single_chunk_plan(r, n_p))
            assert_allclose(
                mmd_distance(coef, weights),
                brute_force_mmd(reports, selected, coef),
                rtol=0,
                atol=1e-10,
            )

    def test_even_in_weights_and_ignores_intercept(self):
        rng = np.random.default_rng(31)
        weights = MmdWeights(
            rng.uniform(0, 2, size=3), rng.uniform(0, 1, size=3), 4, 5
        )
        base = rng.normal(size=4)
        value = mmd_distance(Coefficients(base), weights)
        flipped = base.copy()
        flipped[1:] *= -1.0
        assert mmd_distance(Coefficients(flipped), weights) == value
        shifted = base.copy()
        shifted[0] += 17.0
        assert mmd_distance(Coefficients(shifted), weights) == value


class TestPartitionedApproximation:
    def test_permutation_invariance_single_chunk(self):
        rng = np.random.default_rng(37)
        reports = rng.poisson(2.0, size=(9, 3))
        selected = rng.poisson(2.0, size=(7, 3)).astype(float)
        plan = single_chunk_plan(9, 7)
        base_a = cross_domain_weights(ReportSet(reports), selected, plan)
        base_b = within_domain_weights(selected, plan)
        for _ in range(10):
            pr = rng.permutation(9)
            pu = rng.permutation(7)
            perm_a = cross_domain_weights(ReportSet(reports[pr]), selected[pu], plan)
            perm_b = within_domain_weights(selected[pu], plan)
            assert_array_equal(perm_a, base_a)
            assert_array_equal(perm_b, base_b)

    def test_empty_domains_give_empty_weights(self):
        plan = single_chunk_plan(0, 1)
        weights = mmd_weights(
            reports_of(np.zeros((0, 2), dtype=np.int64)), np.array([[1.0, 1.0]]), plan
        )
        assert_array_equal(weights.a, np.zeros(2))
        assert_array_equal(weights.b, np.zeros(2))

    def test_nonnegative_weights(self):
        rng = np.random.default_rng(41)
        for _ in range(20):
            r = int(rng.integers(1, 15))
            n_p = int(rng.integers(1, 15))
            reports = ReportSet(rng.poisson(2.0, size=(r, 3)))
            selected = rng.poisson(2.0, size=(n_p, 3)).astype(float)
            chunks = int(rng.integers(1, 6))
            plan = partition(r, list(range(n_p)), chunks, seed=int(rng.integers(100)))
            weights = mmd_weights(reports, selected, plan)
            assert np.all(weights.a >= 0.0)
            assert np.all(weights.b >= 0.0)

    def test_multi_chunk_mean_near_exact_value(self):
        rng = np.random.default_rng(43)
        reports = ReportSet(rng.poisson(3.0, size=(60, 4)))
        selected = rng.poisson(3.0, size=(40, 4)).astype(float)
        coef = Coefficients(np.array([0.0, 0.8, -0.5, 0.3, 1.1]))
        exact = mmd_distance(coef, mmd_weights(reports, selected, single_chunk_plan(60, 40)))
        values = []
        for seed in range(30):
            plan = partition(60, list(range(40)), 5, seed=seed)
            values.append(mmd_distance(coef, mmd_weights(reports, selected, plan)))
        assert abs(np.mean(values) - exact) <= 0.10 * abs(exact)

    def test_threaded_matches_serial(self):
        rng = np.random.default_rng(47)
        reports = ReportSet(rng.poisson(2.0, size=(24, 3)))
        selected = rng.poisson(2.0, size=(16, 3)).astype(float)
        plan = partition(24, list(range(16)), 4, seed=3)
        serial = mmd_weights(reports, selected, plan, threads=1)
        threaded = mmd_weights(reports, selected, plan, threads=4)
        assert_allclose(threaded.a, serial.a, rtol=0, atol=1e-9)
        assert_allclose(threaded.b, serial.b, rtol=0, atol=1e-9)


class TestValidation:
    def test_weights_reject_negative_entries(self):
        with pytest.raises(Exception):
            MmdWeights(np.array([-1.0]), np.array([0.0]), 1, 1)

    def test_empty_constructor(self):
        weights = MmdWeights.empty(4)
        assert_array_equal(weights.a, np.zeros(4))
        assert_array_equal(weights.b, np.zeros(4))
        assert weights.n_positive == 0 and weights.n_reports == 0
