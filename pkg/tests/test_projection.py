import numpy as np
import pytest
from numpy.random import Generator, Philox

from dp_postfair.projection import (
    AffineConstraint,
    RankDeficientConstraintError,
    project_affine,
    project_sum,
    project_sum_nonneg,
    solve_threshold,
    threshold_upper_bound,
)
from oracles import (
    affine_projection_oracle,
    projection_oracle_active_set,
    threshold_oracle_bisection,
)


def _rng(seed):
    return Generator(Philox(seed))


class TestProjectSum:
    def test_examples(self):
        np.testing.assert_allclose(project_sum([3.0, 1.0], 2.0), [2.0, 0.0])
        np.testing.assert_allclose(project_sum([1.0, 2.0, 3.0], 9.0), [2.0, 3.0, 4.0])
        v = np.array([4.0, 6.0])
        np.testing.assert_allclose(project_sum(v, 10.0), v)

    def test_sum_restored(self):
        rng = _rng(0)
        for _ in range(200):
            v = rng.normal(0, 10, size=rng.integers(1, 9))
            c = rng.normal(0, 20)
            assert project_sum(v, c).sum() == pytest.approx(c, abs=1e-9)

    def test_shift_covariance(self):
        rng = _rng(1)
        for _ in range(100):
            v = rng.normal(0, 5, size=6)
            shift = rng.normal(0, 100)
            np.testing.assert_allclose(
                project_sum(v + shift, 12.0), project_sum(v, 12.0), atol=1e-9
            )


class TestSolveThreshold:
    def test_examples(self):
        assert solve_threshold([3.0, -1.0], 2.0) == pytest.approx(1.0)
        assert solve_threshold([4.0, 3.0, 2.0, 1.0], 10.0) == 0.0

    def test_requires_descending(self):
        with pytest.raises(ValueError, match="descending"):
            solve_threshold([1.0, 2.0], 3.0)

    def test_against_bisection_oracle(self):
        rng = _rng(2)
        for _ in range(1000):
            n = int(rng.integers(1, 5))
            v = rng.normal(0, 3, size=n)
            c = float(rng.uniform(0.1, 5.0))
            base = project_sum(v, c)
            s = -np.sort(-base)
            t = solve_threshold(s, c)
            t_ref = threshold_oracle_bisection(s, c)
            assert t == pytest.approx(t_ref, abs=1e-12)


class TestProjectSumNonneg:
    def test_examples(self):
        r = project_sum_nonneg([3.0, -1.0], 2.0)
        np.testing.assert_allclose(r.projected, [2.0, 0.0])
        assert r.threshold == pytest.approx(1.0)
        assert list(r.active_zero_set) == [1]

        # verified against the active-set oracle on this instance
        r = project_sum_nonneg([2.0, 2.0, -1.0], 3.0)
        np.testing.assert_allclose(r.projected, [1.5, 1.5, 0.0])
        assert r.threshold == pytest.approx(0.5)
        oracle = projection_oracle_active_set(np.array([2.0, 2.0, -1.0]), 3.0)
        np.testing.assert_allclose(r.projected, oracle, atol=1e-12)

    def test_feasible_input_unchanged(self):
        v = np.array([0.5, 0.0, 1.5])
        r = project_sum_nonneg(v, 2.0)
        np.testing.assert_array_equal(r.projected, v)
        assert r.threshold == 0.0

    def test_rejects_nonpositive_total(self):
        with pytest.raises(ValueError):
            project_sum_nonneg([1.0, 2.0], 0.0)

    def test_matches_active_set_oracle(self):
        rng = _rng(3)
        for _ in range(1000):
            n = int(rng.integers(1, 5))
            v = rng.normal(0.5, 2.0, size=n)
            c = float(rng.uniform(0.1, 4.0))
            got = project_sum_nonneg(v, c).projected
            ref = projection_oracle_active_set(v, c)
            assert np.max(np.abs(got - ref)) <= 1e-9

    def test_feasibility(self):
        rng = _rng(4)
        for _ in range(500):
            v = rng.normal(0, 50, size=8)
            c = float(rng.uniform(1.0, 1e6))
            r = project_sum_nonneg(v, c)
            assert np.all(r.projected >= 0)
            assert r.projected.sum() == pytest.approx(c, abs=1e-9 * max(1.0, c))
            assert r.threshold >= 0

    def test_idempotent_exactly(self):
        rng = _rng(5)
        for _ in range(500):
            v = rng.normal(0, 30, size=6)
            c = float(rng.uniform(0.5, 1e5))
            once = project_sum_nonneg(v, c)
            twice = project_sum_nonneg(once.projected, c)
            np.testing.assert_array_equal(twice.projected, once.projected)
            assert twice.threshold == 0.0

    def test_equals_projection_of_hyperplane_projection(self):
        rng = _rng(6)
        for _ in range(300):
            v = rng.normal(0, 10, size=5)
            direct = project_sum_nonneg(v, 7.0).projected
            staged = project_sum_nonneg(project_sum(v, 7.0), 7.0).projected
            np.testing.assert_allclose(direct, staged, atol=1e-10)

    def test_decomposition_invariant(self):
        rng = _rng(7)
        for _ in range(300):
            v = rng.normal(0, 10, size=6)
            r = project_sum_nonneg(v, 5.0)
            rebuilt = np.maximum(project_sum(v, 5.0) - r.threshold, 0.0)
            np.testing.assert_allclose(r.projected, rebuilt, atol=1e-9)

    def test_swap_equivariance(self):
        rng = _rng(8)
        for _ in range(300):
            v = rng.normal(0, 4, size=5)
            i, j = rng.choice(5, size=2, replace=False)
            swapped = v.copy()
            swapped[[i, j]] = swapped[[j, i]]
            base = project_sum(v, 3.0)
            base_sw = project_sum(swapped, 3.0)
            ref = base.copy()
            ref[[i, j]] = ref[[j, i]]
            np.testing.assert_allclose(base_sw, ref, atol=1e-12)

            r, r_sw = project_sum_nonneg(v, 3.0), project_sum_nonneg(swapped, 3.0)
            ref = r.projected.copy()
            ref[[i, j]] = ref[[j, i]]
            np.testing.assert_allclose(r_sw.projected, ref, atol=1e-12)
            assert r_sw.threshold == pytest.approx(r.threshold, abs=1e-12)

    def test_nonexpansive(self):
        rng = _rng(9)
        for _ in range(300):
            u = rng.normal(0, 5, size=7)
            v = rng.normal(0, 5, size=7)
            pu = project_sum_nonneg(u, 4.0).projected
            pv = project_sum_nonneg(v, 4.0).projected
            assert np.linalg.norm(pu - pv) <= np.linalg.norm(u - v) + 1e-12


class TestThresholdUpperBound:
    def test_examples(self):
        assert threshold_upper_bound([3.0, -1.0]) == pytest.approx(1.0)
        assert threshold_upper_bound([1.0, 2.0]) == 0.0

    def test_dominates_threshold(self):
        rng = _rng(10)
        for _ in range(1000):
            v = rng.normal(0, 3, size=int(rng.integers(1, 7)))
            c = float(rng.uniform(0.1, 5.0))
            base = project_sum(v, c)
            t = solve_threshold(-np.sort(-base), c)
            assert threshold_upper_bound(base) >= t - 1e-12


class TestProjectAffine:
    def test_fixed_point(self):
        a = AffineConstraint([[1.0, 1.0, 0.0], [0.0, 1.0, 1.0]], [3.0, 4.0])
        v = np.array([1.0, 2.0, 2.0])  # already satisfies A v = b
        np.testing.assert_allclose(project_affine(v, a), v, atol=1e-12)

    def test_specializes_to_project_sum(self):
        rng = _rng(11)
        for _ in range(100):
            v = rng.normal(0, 5, size=6)
            a = AffineConstraint(np.ones((1, 6)), [7.5])
            np.testing.assert_allclose(
                project_affine(v, a), project_sum(v, 7.5), atol=1e-10
            )

    def test_against_kkt_oracle(self):
        rng = _rng(12)
        for _ in range(200):
            mat = rng.normal(0, 1, size=(2, 4))
            rhs = rng.normal(0, 1, size=2)
            v = rng.normal(0, 3, size=4)
            constraint = AffineConstraint(mat, rhs)
            got = project_affine(v, constraint)
            ref = affine_projection_oracle(v, mat, rhs)
            assert np.max(np.abs(got - ref)) <= 1e-8
            resid = np.max(np.abs(mat @ got - rhs))
            assert resid <= 1e-8 * max(1.0, np.max(np.abs(rhs)))

    def test_rank_deficient_rejected(self):
        with pytest.raises(RankDeficientConstraintError):
            AffineConstraint([[1.0, 2.0], [2.0, 4.0]], [1.0, 2.0])
        with pytest.raises(RankDeficientConstraintError):
            AffineConstraint([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]], [1.0, 1.0, 2.0])
