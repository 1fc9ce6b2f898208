import numpy as np
import pytest

from loopsparse.dictionary import Dictionary
from loopsparse.errors import (
    EnumerationTooLarge,
    Infeasible,
    IterationCapExceeded,
    NoEligibleColumns,
)
from loopsparse.features import FeatureVector, unit_feature
from loopsparse.homotopy import SolverConfig, solve
from loopsparse.oracles import cd_solve, l0_solve, lsq_min_norm, nn_match

from conftest import random_dictionary, random_unit


def soft(x, lam):
    return np.sign(x) * np.maximum(np.abs(x) - lam, 0.0)


class TestCoordinateDescent:
    def test_identity_exact_in_one_sweep(self, rng):
        d = Dictionary(10)
        b = random_unit(rng, 10)
        rep = cd_solve(d, b, 0.5, gap_tol=1e-12)
        assert rep.iterations == 1
        dense = np.zeros(10)
        for j, v in rep.solution.items():
            dense[j] = v
        np.testing.assert_allclose(dense, soft(b.values, 0.5), atol=1e-14)

    def test_above_lambda_max_zero_one_sweep(self, rng):
        d = random_dictionary(rng, 8, 6)
        b = random_unit(rng, 8)
        lmax = float(np.max(np.abs(d.correlations(b.values))))
        rep = cd_solve(d, b, min(1.0, lmax * 1.01), gap_tol=1e-12)
        assert rep.solution == {}
        assert rep.iterations == 1

    def test_iteration_cap(self, rng):
        d = random_dictionary(rng, 6, 12)
        b = random_unit(rng, 6)
        with pytest.raises(IterationCapExceeded):
            cd_solve(d, b, 0.1, gap_tol=1e-14, max_sweeps=1)


class TestL0:
    def test_exact_one_sparse_representation(self, rng):
        d = random_dictionary(rng, 8, 6)
        b = FeatureVector(d.column(8 + 3))
        rep = l0_solve(d, b, max_support=3, residual_tol=1e-9)
        assert list(rep.solution) == [8 + 3]
        assert rep.solution[8 + 3] == pytest.approx(1.0, abs=1e-9)

    def test_orthogonal_two_sparse(self):
        d = Dictionary(4)
        d.append(unit_feature([1.0, 1.0, 0, 0]))
        d.append(unit_feature([0, 0, 1.0, 1.0]))
        b = unit_feature([1.0, 1.0, 1.0, 1.0])
        rep = l0_solve(d, b, max_support=3, residual_tol=1e-9)
        assert len(rep.solution) == 2
        assert sorted(rep.solution) == [4, 5]

    def test_l1_support_no_smaller_than_l0(self, rng):
        # tiny-instance comparison between the relaxation and the oracle
        d = random_dictionary(rng, 6, 6)
        b = FeatureVector(d.column(6 + 2))
        l0 = l0_solve(d, b, max_support=3, residual_tol=1e-9)
        l1 = solve(d, b, SolverConfig(lambda_=0.5))
        assert len(l0.solution) <= l1.nnz()

    def test_infeasible_with_tight_tolerance(self, rng):
        d = random_dictionary(rng, 8, 2)
        b = random_unit(rng, 8)
        with pytest.raises(Infeasible):
            l0_solve(d, b, max_support=1, residual_tol=1e-12)

    def test_enumeration_guard(self, rng):
        d = random_dictionary(rng, 300, 0)
        b = random_unit(rng, 300)
        with pytest.raises(EnumerationTooLarge):
            l0_solve(d, b, max_support=3, residual_tol=1e-9)

    def test_support_cap_validated(self, rng):
        d = random_dictionary(rng, 4, 0)
        with pytest.raises(ValueError):
            l0_solve(d, random_unit(rng, 4), max_support=4, residual_tol=1e-9)


class TestLsqMinNorm:
    def test_identity_returns_b(self, rng):
        d = Dictionary(7)
        b = random_unit(rng, 7)
        np.testing.assert_allclose(lsq_min_norm(d, b), b.values, atol=1e-12)

    def test_duplicate_columns_split_weight(self, rng):
        d = Dictionary(6)
        f = random_unit(rng, 6)
        d.append(f)
        d.append(f)
        alpha = lsq_min_norm(d, f)
        assert alpha[6] == pytest.approx(alpha[7], abs=1e-12)

    def test_always_consistent(self, rng):
        for _ in range(10):
            n, m = int(rng.integers(2, 15)), int(rng.integers(0, 20))
            d = random_dictionary(rng, n, m)
            b = random_unit(rng, n)
            alpha = lsq_min_norm(d, b)
            assert np.linalg.norm(d.dense() @ alpha - b.values) <= 1e-10


class TestNNMatch:
    def test_exact_match_outside_window(self, rng):
        d = random_dictionary(rng, 10, 30)
        b = FeatureVector(d.column(10 + 4))
        j, dist = nn_match(d, b, t_g_frames=10, query_index=30)
        assert j == 4
        assert dist == pytest.approx(0.0, abs=1e-12)

    def test_equidistant_tie_lower_index(self, rng):
        d = Dictionary(4)
        d.append(FeatureVector([1.0, 0, 0, 0]))
        d.append(FeatureVector([0, 1.0, 0, 0]))
        b = unit_feature([1.0, 1.0, 0, 0])
        j, _ = nn_match(d, b, t_g_frames=0, query_index=10)
        assert j == 0

    def test_window_exclusion(self, rng):
        d = random_dictionary(rng, 6, 5)
        with pytest.raises(NoEligibleColumns):
            nn_match(d, random_unit(rng, 6), t_g_frames=10, query_index=5)

    def test_empty_dictionary(self, rng):
        d = Dictionary(6)
        with pytest.raises(NoEligibleColumns):
            nn_match(d, random_unit(rng, 6), t_g_frames=0, query_index=0)

    def test_distance_argmin_equals_correlation_argmax(self, rng):
        for _ in range(10):
            d = random_dictionary(rng, 12, 25)
            b = random_unit(rng, 12)
            j, dist = nn_match(d, b, t_g_frames=3, query_index=25)
            rows = d.image_block()
            corr = rows @ b.values
            eligible = np.array([abs(25 - k) > 3 for k in range(25)])
            corr[~eligible] = -np.inf
            assert j == int(np.argmax(corr))
            # for unit vectors ||d - b||^2 = 2 - 2 d.b
            assert dist == pytest.approx(np.sqrt(2 - 2 * corr[j]), abs=1e-9)
