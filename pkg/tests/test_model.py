import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bilinreg.exceptions import ConfigError, ShapeError
from bilinreg.model import (
    BilinearModel,
    BilinearSoftmaxModel,
    LinearModel,
    LinearSoftmaxModel,
    batch_scores,
    blr_score,
    bsr_scores,
    decompose_w,
    dumps,
    llr_score,
    load_model,
    loads,
    logistic,
    lsr_scores,
    reconstruct_w,
    save_model,
    softmax,
)


class TestLogistic:
    def test_half_at_zero(self):
        assert logistic(0.0) == 0.5

    def test_ln3(self):
        assert logistic(math.log(3)) == pytest.approx(0.75, abs=1e-15)

    def test_symmetry(self, rng):
        z = rng.standard_normal(100) * 20
        np.testing.assert_allclose(logistic(-z), 1 - logistic(z), atol=1e-15)

    def test_extremes_do_not_overflow(self):
        with np.errstate(over="raise", invalid="raise"):
            out = logistic(np.array([-1000.0, 1000.0]))
        assert out[0] >= 0 and out[1] == 1.0


class TestSoftmax:
    def test_two_zeros(self):
        np.testing.assert_allclose(softmax([0.0, 0.0]), [0.5, 0.5])

    def test_constant_is_uniform(self):
        np.testing.assert_allclose(softmax([4.2] * 5), np.full(5, 0.2), atol=1e-15)

    def test_closed_form(self):
        np.testing.assert_allclose(softmax(np.log([1.0, 2.0, 3.0])), [1 / 6, 2 / 6, 3 / 6], atol=1e-15)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(-50, 50), min_size=1, max_size=12), st.floats(-100, 100))
    def test_sum_and_shift(self, z, c):
        p = softmax(z)
        assert abs(p.sum() - 1) <= 1e-12
        np.testing.assert_allclose(softmax(np.array(z) + c), p, atol=1e-12)


class TestScores:
    def test_llr_examples(self):
        X = np.array([[1.0, 2.0], [3.0, 4.0]])
        assert llr_score(LinearModel(np.zeros((2, 2))), X) == 0
        assert llr_score(LinearModel(X), X) == 30
        assert llr_score(LinearModel(np.eye(2)), X) == 5

    def test_blr_zero_a(self, rng):
        m = BilinearModel(np.zeros((4, 2)), rng.standard_normal((3, 2)))
        assert blr_score(m, rng.standard_normal((4, 3))) == 0

    def test_blr_selector(self, rng):
        X = rng.standard_normal((4, 3))
        a, b = np.zeros((4, 1)), np.zeros((3, 1))
        a[2, 0] = b[1, 0] = 1
        assert blr_score(BilinearModel(a, b), X) == X[2, 1]

    def test_blr_equals_llr_of_reconstruction(self, rng):
        for _ in range(20):
            m = BilinearModel(rng.standard_normal((5, 3)), rng.standard_normal((4, 3)))
            X = rng.standard_normal((5, 4))
            assert abs(blr_score(m, X) - llr_score(reconstruct_w(m), X)) <= 1e-12 * (1 + abs(blr_score(m, X)))

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            llr_score(LinearModel(np.eye(2)), np.eye(3))

    def test_bsr_zero_weights_uniform(self, rng):
        m = BilinearSoftmaxModel(np.zeros((4, 3, 2)), rng.standard_normal((4, 3, 2)))
        z = bsr_scores(m, rng.standard_normal((3, 3)))
        np.testing.assert_array_equal(z, 0)
        np.testing.assert_allclose(softmax(z), 0.25)

    def test_bsr_single_class(self, rng):
        A, B = rng.standard_normal((1, 3, 2)), rng.standard_normal((1, 4, 2))
        X = rng.standard_normal((3, 4))
        assert bsr_scores(BilinearSoftmaxModel(A, B), X)[0] == pytest.approx(blr_score(BilinearModel(A[0], B[0]), X))

    def test_lsr_examples(self, rng):
        X = rng.standard_normal((3, 3))
        np.testing.assert_array_equal(lsr_scores(LinearSoftmaxModel(np.zeros((4, 3, 3))), X), 0)
        W = rng.standard_normal((3, 3))
        z = lsr_scores(LinearSoftmaxModel(np.stack([W, -W])), X)
        np.testing.assert_allclose(z, [llr_score(LinearModel(W), X), -llr_score(LinearModel(W), X)])
        assert softmax(z)[0] == pytest.approx(logistic(2 * z[0]), abs=1e-15)
        # W_k = e_k e_1^T picks the first-column pixels
        sel = np.zeros((3, 3, 3))
        for k in range(3):
            sel[k, k, 0] = 1
        np.testing.assert_array_equal(lsr_scores(LinearSoftmaxModel(sel), X), X[:, 0])

    def test_batch_scores_match_single(self, rng):
        X = rng.standard_normal((6, 4, 5))
        models = [
            LinearModel(rng.standard_normal((4, 5))),
            BilinearModel(rng.standard_normal((4, 2)), rng.standard_normal((5, 2))),
            LinearSoftmaxModel(rng.standard_normal((3, 4, 5))),
            BilinearSoftmaxModel(rng.standard_normal((3, 4, 2)), rng.standard_normal((3, 5, 2))),
        ]
        singles = [llr_score, blr_score, lsr_scores, bsr_scores]
        for m, f in zip(models, singles):
            np.testing.assert_allclose(batch_scores(m, X), np.array([f(m, x) for x in X]), atol=1e-12)


class TestModelValidation:
    def test_rank_mismatch(self):
        with pytest.raises(ShapeError):
            BilinearModel(np.zeros((3, 2)), np.zeros((3, 1)))

    def test_non_finite(self):
        with pytest.raises(ShapeError):
            LinearModel(np.array([[np.inf]]))

    def test_class_count_mismatch(self):
        with pytest.raises(ShapeError):
            BilinearSoftmaxModel(np.zeros((2, 3, 1)), np.zeros((3, 3, 1)))


class TestEquivalence:
    def test_outer_product(self):
        W = reconstruct_w(BilinearModel(np.array([[1.0], [0.0]]), np.array([[0.0], [1.0]]))).W
        np.testing.assert_array_equal(W, [[0, 1], [0, 0]])

    def test_zero(self):
        assert not reconstruct_w(BilinearModel(np.zeros((3, 2)), np.ones((4, 2)))).W.any()
        m = decompose_w(LinearModel(np.zeros((3, 3))), 2)
        assert not m.A.any() and not m.B.any()

    def test_diagonal(self):
        m = decompose_w(LinearModel(np.diag([4.0, 1.0])), 2)
        # signs of singular vector pairs are arbitrary but shared by a_l and b_l
        sign = np.sign(np.diag(m.A))
        np.testing.assert_allclose(m.A * sign, [[2, 0], [0, 1]], atol=1e-15)
        np.testing.assert_allclose(m.B * sign, [[2, 0], [0, 1]], atol=1e-15)

    def test_full_rank_round_trip(self, rng):
        W = rng.standard_normal((5, 7))
        rec = reconstruct_w(decompose_w(LinearModel(W), 5)).W
        assert np.linalg.norm(rec - W) < 1e-10

    def test_rank_one(self, rng):
        W = np.outer(rng.standard_normal(4), rng.standard_normal(6))
        rec = reconstruct_w(decompose_w(LinearModel(W), 1)).W
        assert np.linalg.norm(rec - W) <= 1e-12 * np.linalg.norm(W)

    def test_truncation_matches_eckart_young(self, rng):
        W = rng.standard_normal((6, 5))
        s = np.linalg.svd(W, compute_uv=False)
        for L in range(1, 5):
            err = np.linalg.norm(reconstruct_w(decompose_w(LinearModel(W), L)).W - W)
            assert err == pytest.approx(np.sqrt(np.sum(s[L:] ** 2)), rel=1e-9)

    def test_rank_out_of_range(self):
        with pytest.raises(ConfigError):
            decompose_w(LinearModel(np.eye(3)), 4)
        with pytest.raises(ConfigError):
            decompose_w(LinearModel(np.eye(3)), 0)

    def test_balanced_norms(self, rng):
        m = decompose_w(LinearModel(rng.standard_normal((5, 6))), 5)
        np.testing.assert_allclose(np.linalg.norm(m.A, axis=0), np.linalg.norm(m.B, axis=0), rtol=1e-12)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**31), st.sampled_from([0.1, 2.0, -3.0, 7.5]))
    def test_rescaling_leaves_scores(self, seed, beta):
        rng = np.random.default_rng(seed)
        A, B = rng.standard_normal((4, 3)), rng.standard_normal((5, 3))
        X = rng.standard_normal((10, 4, 5))
        l = int(rng.integers(3))
        A2, B2 = A.copy(), B.copy()
        A2[:, l] *= beta
        B2[:, l] /= beta
        z1 = batch_scores(BilinearModel(A, B), X)
        z2 = batch_scores(BilinearModel(A2, B2), X)
        assert np.max(np.abs(z1 - z2)) <= 1e-12 * max(1.0, np.max(np.abs(z1)))


class TestSerialization:
    @pytest.mark.parametrize("kind", ["llr", "lsr", "blr", "bsr"])
    def test_round_trip_is_bit_exact(self, rng, tmp_path, kind):
        m = {
            "llr": lambda: LinearModel(rng.standard_normal((3, 4))),
            "lsr": lambda: LinearSoftmaxModel(rng.standard_normal((2, 3, 4))),
            "blr": lambda: BilinearModel(rng.standard_normal((3, 2)), rng.standard_normal((4, 2))),
            "bsr": lambda: BilinearSoftmaxModel(rng.standard_normal((2, 3, 2)), rng.standard_normal((2, 4, 2))),
        }[kind]()
        path = tmp_path / f"{kind}.txt"
        save_model(m, path)
        back = load_model(path)
        assert type(back) is type(m)
        for name in ("W", "A", "B"):
            if hasattr(m, name):
                assert np.array_equal(getattr(m, name), getattr(back, name))
        assert dumps(back) == dumps(m)

    def test_layout_of_blr(self):
        text = dumps(BilinearModel(np.array([[1.0], [2.0]]), np.array([[3.0], [4.0], [5.0]])))
        assert text == "blr 2 3 1\n1.0 2.0\n3.0 4.0 5.0\n"

    def test_bad_files(self):
        with pytest.raises(ConfigError):
            loads("")
        with pytest.raises(ConfigError):
            loads("xyz 1 2\n1 2\n")
        with pytest.raises(ConfigError):
            loads("llr 2 2\n1 2 3\n")
