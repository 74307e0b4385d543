#!/usr/bin/env python3
"""
Tests for the tensor helpers, NMF and CP-ALS
"""

import math
import sys
from pathlib import Path

import numpy as np
import pytest

# Add project root to Python path
sys.path.insert(0, str(Path(__file__).parent))

from src.core.exceptions import FactorizationError
from src.models import (
    ActivityMatrix,
    FactorModel,
    TensorFactorModel,
    cp_als,
    frobenius_norm,
    khatri_rao,
    minmax_normalize,
    mode_unfold,
    nmf,
    nmf_rank_sweep,
    reconstruct_tensor,
)
from src.synth.generator import generate_tensor, planted_low_rank


class TestFrobenius:
    def test_zero(self):
        assert frobenius_norm(np.zeros((3, 4))) == 0.0

    def test_identity(self):
        assert frobenius_norm(np.eye(2)) == pytest.approx(math.sqrt(2))

    def test_hand_computed(self):
        assert frobenius_norm([[1, 2], [3, 4]]) == pytest.approx(math.sqrt(30))


class TestKhatriRao:
    def test_ones(self):
        np.testing.assert_array_equal(khatri_rao(np.ones((2, 2)), np.ones((3, 2))), np.ones((6, 2)))

    def test_definition(self):
        np.testing.assert_array_equal(khatri_rao([[1], [2]], [[3], [4]]), [[3], [4], [6], [8]])

    def test_shape(self):
        assert khatri_rao(np.ones((4, 3)), np.ones((5, 3))).shape == (20, 3)

    def test_column_mismatch(self):
        with pytest.raises(FactorizationError):
            khatri_rao(np.ones((4, 3)), np.ones((5, 2)))


class TestModeUnfold:
    def test_scalar_tensor(self):
        T = np.array([[[7.0]]])
        for mode in range(3):
            np.testing.assert_array_equal(mode_unfold(T, mode), [[7.0]])

    def test_shapes(self):
        T = np.arange(24.0).reshape(2, 3, 4)
        assert [mode_unfold(T, m).shape for m in range(3)] == [(2, 12), (3, 8), (4, 6)]

    def test_rank_one(self):
        u, v, w = np.array([1.0, 2.0]), np.array([3.0, 4.0, 5.0]), np.array([6.0, 7.0])
        T = np.einsum("i,j,l->ijl", u, v, w)
        vw = khatri_rao(v[:, None], w[:, None])
        np.testing.assert_allclose(mode_unfold(T, 0), u[:, None] @ vw.T)

    def test_bad_mode(self):
        with pytest.raises(FactorizationError):
            mode_unfold(np.zeros((2, 2, 2)), 3)


@pytest.mark.parametrize("seed", range(100))
def test_unfolding_identities(seed):
    rng = np.random.default_rng(seed)
    N, M, P, k = rng.integers(1, 7, size=4)
    W, B, C = rng.normal(size=(N, k)), rng.normal(size=(M, k)), rng.normal(size=(P, k))
    T = reconstruct_tensor(W, B.T, C.T)
    assert np.max(np.abs(mode_unfold(T, 0) - W @ khatri_rao(B, C).T)) <= 1e-10
    assert np.max(np.abs(mode_unfold(T, 1) - B @ khatri_rao(W, C).T)) <= 1e-10
    assert np.max(np.abs(mode_unfold(T, 2) - C @ khatri_rao(W, B).T)) <= 1e-10


class TestMinMax:
    def test_constant_row(self):
        np.testing.assert_array_equal(minmax_normalize([[2, 2, 2]]), [[0, 0, 0]])

    def test_two_values(self):
        np.testing.assert_array_equal(minmax_normalize([[1, 3]]), [[0, 1]])

    def test_three_values(self):
        np.testing.assert_allclose(minmax_normalize([[0, 5, 10], [4, 2, 0]]), [[0, 0.5, 1], [1, 0.5, 0]])


class TestNMF:
    def test_zero_matrix(self):
        model = nmf(np.zeros((4, 5)), 2, seed=0)
        assert model.objective_trace == [0.0]
        assert model.iterations == 0
        assert not model.W.any() and not model.L.any()

    def test_rank_one_exact(self):
        A = np.outer([1.0, 2.0], [3.0, 0.0, 1.0])
        model = nmf(A, 1, tol=1e-14, max_iter=5000, seed=1)
        assert model.relative_error(A) <= 1e-6

    @pytest.mark.parametrize("n_rows", [50, 200])
    def test_planted_recovery(self, n_rows):
        A, _, _ = planted_low_rank(n_rows, 24, 3, seed=n_rows)
        model = nmf(A, 3, tol=1e-9, max_iter=500, seed=42)
        assert model.relative_error(A) <= 1e-3
        assert model.iterations <= 500

    def test_objective_never_increases(self):
        A, _, _ = planted_low_rank(200, 24, 3, seed=9)
        trace = nmf(A, 3, tol=1e-9, max_iter=300, seed=3).objective_trace
        slack = 1e-9 * trace[0]
        assert all(b <= a + slack for a, b in zip(trace, trace[1:]))

    def test_factors_non_negative_and_sorted(self):
        A = np.random.default_rng(4).poisson(3.0, size=(30, 24)).astype(float)
        model = nmf(A, 3, seed=5)
        assert (model.W >= 0).all() and (model.L >= 0).all()
        norms = np.linalg.norm(model.W, axis=0)
        assert list(norms) == sorted(norms, reverse=True)

    def test_deterministic(self):
        A = np.random.default_rng(8).poisson(2.0, size=(20, 24)).astype(float)
        a, b = nmf(A, 3, seed=11), nmf(A, 3, seed=11)
        np.testing.assert_array_equal(a.W, b.W)
        np.testing.assert_array_equal(a.L, b.L)

    @pytest.mark.parametrize("k", [0, 5, 2.5])
    def test_k_out_of_range(self, k):
        with pytest.raises(FactorizationError):
            nmf(np.ones((4, 5)), k)

    def test_negative_input_rejected(self):
        with pytest.raises(FactorizationError):
            nmf(np.array([[1.0, -1.0], [0.0, 1.0]]), 1)

    def test_rank_sweep(self):
        A, _, _ = planted_low_rank(30, 12, 3, seed=2)
        models = nmf_rank_sweep(A, [1, 2, 3], seed=0, tol=1e-7)
        assert list(models) == [1, 2, 3]
        assert models[3].relative_error(A) < models[1].relative_error(A)

    def test_save_and_load(self, tmp_path):
        matrix = ActivityMatrix(
            np.random.default_rng(1).poisson(2.0, size=(6, 4)).astype(float),
            ["u001", "u002", "u003", "u004", "u005", "u006"],
            ["a", "b", "c", "d"],
        )
        model = nmf(matrix, 2, seed=3)
        loaded = FactorModel.load(model.save(tmp_path / "model"))
        np.testing.assert_allclose(loaded.W, model.W, rtol=1e-12)
        np.testing.assert_allclose(loaded.L, model.L, rtol=1e-12)
        assert loaded.row_keys == matrix.row_keys
        assert loaded.col_labels == matrix.col_labels
        assert loaded.objective_trace == model.objective_trace

    def test_matrix_csv_round_trip(self, tmp_path):
        matrix = ActivityMatrix(np.arange(6.0).reshape(2, 3), ["007", "u2"], ["0", "1", "2"])
        matrix.to_csv(tmp_path / "A.csv")
        loaded = ActivityMatrix.from_csv(tmp_path / "A.csv")
        assert loaded.row_keys == ["007", "u2"]
        np.testing.assert_array_equal(loaded.values, matrix.values)


class TestCPALS:
    def test_zero_tensor(self):
        model = cp_als(np.zeros((3, 4, 5)), 2)
        assert model.fit_trace == [0.0]
        assert not model.W.any() and not model.L_M.any() and not model.L_P.any()

    def test_rank_one_tensor(self):
        rng = np.random.default_rng(0)
        T = np.einsum("i,j,l->ijl", rng.random(5) + 0.5, rng.random(4) + 0.5, rng.random(3) + 0.5)
        model = cp_als(T, 2, tol=1e-14, max_iter=2000)
        assert model.relative_error <= 1e-6

    @pytest.mark.parametrize("init", ["random", "singular_vector"])
    def test_planted_rank_three(self, init):
        T, _ = generate_tensor((20, 24, 10), 3, seed=1)
        model = cp_als(T, 3, tol=1e-8, max_iter=500, init=init, seed=2)
        assert model.fit >= 0.99

    def test_init_modes_agree_on_large_tensor(self):
        T, _ = generate_tensor((100, 24, 50), 3, seed=5, noise_level=0.005)
        models = [cp_als(T, 3, tol=1e-9, max_iter=500, init=init, seed=6) for init in ("random", "singular_vector")]
        assert all(m.fit >= 0.99 for m in models)
        errors = [m.relative_error for m in models]
        assert abs(errors[0] - errors[1]) <= 0.05 * max(errors)

    def test_stops_on_small_improvement(self):
        T, _ = generate_tensor((20, 24, 10), 3, seed=3, noise_level=0.05)
        model = cp_als(T, 3, tol=1e-5, max_iter=500, seed=4)
        assert model.converged
        assert model.fit_trace[-2] - model.fit_trace[-1] < 1e-5
        # every earlier sweep improved by at least tol
        assert all(a - b >= 1e-5 for a, b in zip(model.fit_trace[:-2], model.fit_trace[1:-1]))

    def test_relative_tolerance_scales_by_norm(self):
        T, _ = generate_tensor((10, 8, 6), 2, seed=7, noise_level=0.05)
        absolute = cp_als(T * 1000.0, 2, tol=1e-5, max_iter=500, seed=1)
        relative = cp_als(T * 1000.0, 2, tol=1e-5, max_iter=500, seed=1, relative_tol=True)
        assert relative.iterations <= absolute.iterations

    def test_canonical_factors(self):
        T, _ = generate_tensor((15, 7, 9), 3, seed=8)
        model = cp_als(T, 3, tol=1e-8, max_iter=300)
        np.testing.assert_allclose(np.linalg.norm(model.L_M, axis=1), 1.0)
        np.testing.assert_allclose(np.linalg.norm(model.L_P, axis=1), 1.0)
        norms = np.linalg.norm(model.W, axis=0)
        assert list(norms) == sorted(norms, reverse=True)
        np.testing.assert_allclose(model.reconstruct(), T, atol=1e-2 * np.abs(T).max())

    def test_deterministic(self):
        T, _ = generate_tensor((10, 7, 6), 3, seed=2, noise_level=0.1)
        a = cp_als(T, 3, init="random", seed=5)
        b = cp_als(T, 3, init="random", seed=5)
        np.testing.assert_array_equal(a.W, b.W)
        assert a.fit_trace == b.fit_trace

    @pytest.mark.parametrize("k", [1, 7])
    def test_k_out_of_range(self, k):
        with pytest.raises(FactorizationError):
            cp_als(np.ones((6, 7, 8)), k)

    def test_unknown_init(self):
        with pytest.raises(FactorizationError):
            cp_als(np.ones((3, 3, 3)), 2, init="svd")

    def test_save_and_load(self, tmp_path):
        T, _ = generate_tensor((6, 5, 4), 2, seed=1)
        model = cp_als(T, 2, seed=0)
        loaded = TensorFactorModel.load(model.save(tmp_path / "cp"))
        np.testing.assert_allclose(loaded.W, model.W, rtol=1e-12)
        np.testing.assert_allclose(loaded.L_P, model.L_P, rtol=1e-12)
        assert loaded.fit == pytest.approx(model.fit)
        assert loaded.init_mode == "singular_vector"


if __name__ == "__main__":
    sys.exit(pytest.main([__file__]))
