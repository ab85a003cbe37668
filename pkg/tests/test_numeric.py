import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypergat import numeric as nk
from hypergat.errors import NumericalError

offset_lists = st.lists(st.integers(1, 5), min_size=1, max_size=6).map(lambda s: np.concatenate([[0], np.cumsum(s)]))


def _rng(seed=0):
    return np.random.default_rng(seed)


class TestMatmul:
    def test_identity(self):
        b = _rng().normal(size=(3, 4))
        assert np.array_equal(nk.matmul(np.eye(3), b), b)

    def test_hand(self):
        assert nk.matmul(np.array([[1., 2.], [3., 4.]]), np.array([[1.], [1.]])).tolist() == [[3.], [7.]]

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            nk.matmul(np.ones((2, 3)), np.ones((2, 3)))

    @pytest.mark.parametrize("seed", range(3))
    def test_backward(self, f64, seed):
        rng = _rng(seed)
        a, b = rng.normal(size=(5, 4)), rng.normal(size=(4, 3))
        r = rng.normal(size=(5, 3))

        def f(a, b):
            da, db = nk.matmul_backward(a, b, r)
            return float((nk.matmul(a, b) * r).sum()), (da, db)
        assert nk.grad_check(f, [a, b]) < 1e-6


class TestOneHot:
    def test_selects_column(self):
        w = np.arange(8.0).reshape(2, 4)
        assert nk.one_hot_linear(w, [2]).tolist() == [w[:, 2].tolist()]

    def test_duplicates(self):
        out = nk.one_hot_linear(_rng().normal(size=(3, 5)), [1, 1])
        assert np.array_equal(out[0], out[1])

    def test_out_of_range(self):
        with pytest.raises(IndexError):
            nk.one_hot_linear(np.ones((2, 3)), [3])

    def test_backward_touches_only_selected(self, f64):
        rng = _rng(1)
        w = rng.normal(size=(3, 5))
        ids = [4, 1, 4]
        r = rng.normal(size=(3, 3))

        def f(w):
            return float((nk.one_hot_linear(w, ids) * r).sum()), (nk.one_hot_linear_backward(w.shape, ids, r),)
        assert nk.grad_check(f, [w]) < 1e-6
        g = nk.one_hot_linear_backward(w.shape, ids, r)
        assert np.all(g[:, [0, 2, 3]] == 0)


class TestSegmentSoftmax:
    def test_singleton(self):
        assert nk.segment_softmax(np.array([3.7]), [0, 1]).tolist() == [1.0]

    def test_equal(self):
        assert nk.segment_softmax(np.array([2.0, 2.0]), [0, 2]).tolist() == [0.5, 0.5]

    def test_log3(self, f64):
        np.testing.assert_allclose(nk.segment_softmax(np.array([0.0, math.log(3)]), [0, 2]), [0.25, 0.75],
                                   atol=1e-15)

    @given(offset_lists, st.integers(0, 2**32))
    @settings(max_examples=100)
    def test_sums_and_shift(self, off, seed):
        rng = _rng(seed)
        for prec, tol in (("float32", 1e-6), ("float64", 1e-12)):
            with nk.precision(prec):
                s = rng.normal(scale=5, size=off[-1]).astype(nk.get_dtype())
                w = nk.segment_softmax(s, off)
                assert np.all(w >= 0)
                np.testing.assert_allclose(nk.segment_sum(w, off), 1.0, atol=tol)
        shift = np.repeat(rng.normal(scale=10, size=len(off) - 1), np.diff(off))
        np.testing.assert_allclose(nk.segment_softmax(s + shift, off), nk.segment_softmax(s, off), atol=1e-6)

    @pytest.mark.parametrize("seed", range(3))
    def test_backward(self, f64, seed):
        rng = _rng(seed)
        off = np.array([0, 2, 3, 7])
        s = rng.normal(size=7)
        r = rng.normal(size=7)

        def f(s):
            w = nk.segment_softmax(s, off)
            return float((w * r).sum()), (nk.segment_softmax_backward(w, r, off),)
        assert nk.grad_check(f, [s]) < 1e-6

    def test_bad_offsets(self):
        with pytest.raises(ValueError):
            nk.segment_softmax(np.ones(3), [0, 0, 3])


class TestActivations:
    def test_values(self):
        assert nk.leaky_relu(np.array(-2.0), 0.2) == pytest.approx(-0.4)
        assert nk.relu(np.array([3.0, -3.0])).tolist() == [3.0, 0.0]

    def test_right_derivative_at_zero(self):
        assert nk.leaky_relu_backward(np.array([0.0]), np.array([1.0])).tolist() == [0.2]
        assert nk.relu_backward(np.array([0.0]), np.array([1.0])).tolist() == [0.0]

    @pytest.mark.parametrize("seed", range(3))
    def test_backward_away_from_kink(self, f64, seed):
        rng = _rng(seed)
        x = rng.normal(size=(4, 3))
        x[np.abs(x) < 1e-3] = 0.5
        r = rng.normal(size=x.shape)
        for fwd, bwd in ((nk.relu, nk.relu_backward), (nk.leaky_relu, nk.leaky_relu_backward)):
            def f(x):
                return float((fwd(x) * r).sum()), (bwd(x, r),)
            assert nk.grad_check(f, [x]) < 1e-6


class TestDropout:
    def test_eval_identity(self):
        x = _rng().normal(size=(3, 3))
        y, mask = nk.dropout(x, 0.3, False)
        assert y is x and mask is None

    def test_zero_rate(self):
        x = np.ones(4)
        assert nk.dropout(x, 0.0, True, _rng())[0] is x

    def test_law_of_large_numbers(self):
        y, _ = nk.dropout(np.ones(100_000), 0.3, True, _rng(5))
        assert abs(y.mean() - 1.0) < 0.01
        assert abs((y == 0).mean() - 0.3) < 0.01

    def test_rate_one_rejected(self):
        with pytest.raises(ValueError):
            nk.dropout(np.ones(2), 1.0, True, _rng())

    def test_backward_reuses_mask(self):
        y, mask = nk.dropout(np.ones(10), 0.5, True, _rng(2))
        assert np.array_equal(nk.dropout_backward(np.ones(10), mask), y)


class TestPoolAndLoss:
    def test_pool(self):
        assert nk.mean_pool_rows(np.array([[1.0, 2.0]])).tolist() == [1.0, 2.0]
        assert nk.mean_pool_rows(np.array([[0.0, 2.0], [2.0, 0.0]])).tolist() == [1.0, 1.0]
        assert nk.mean_pool_rows_backward(np.array([3.0, 6.0]), 3).tolist() == [[1.0, 2.0]] * 3
        with pytest.raises(ValueError):
            nk.mean_pool_rows(np.zeros((0, 2)))

    def test_uniform_logits(self, f64):
        loss, _ = nk.softmax_cross_entropy(np.zeros(5), 2)
        assert loss == pytest.approx(math.log(5), abs=1e-15)

    def test_saturated(self, f64):
        loss, _ = nk.softmax_cross_entropy(np.array([30.0, -30.0]), 0)
        assert loss < 1e-9

    def test_ln2(self, f64):
        loss, grad = nk.softmax_cross_entropy(np.array([0.0, 0.0, math.log(2)]), 2)
        assert loss == pytest.approx(math.log(2), abs=1e-15)
        np.testing.assert_allclose(grad, [0.25, 0.25, -0.5], atol=1e-15)

    def test_label_range(self):
        with pytest.raises(IndexError):
            nk.softmax_cross_entropy(np.zeros(2), 2)


class TestAdam:
    def test_zero_gradient(self):
        p = np.array([1.0, -2.0])
        nk.adam_step(p, np.zeros(2), nk.AdamState.like(p), 0.1)
        assert p.tolist() == [1.0, -2.0]

    def test_first_step_magnitude(self, f64):
        p = np.array([0.0])
        st_ = nk.AdamState.like(p)
        nk.adam_step(p, np.array([1.0]), st_, 1e-3)
        # m_hat = v_hat = 1 on step one, so the update is lr / (1 + eps)
        assert p[0] == pytest.approx(-1e-3 / (1 + 1e-8), abs=1e-15)
        assert st_.step == 1

    @given(st.floats(-100, 100).filter(lambda g: abs(g) > 1e-6))
    def test_sign_opposes_gradient(self, g):
        p = np.array([0.0])
        nk.adam_step(p, np.array([g]), nk.AdamState.like(p), 0.01)
        assert np.sign(p[0]) == -np.sign(g)

    def test_matches_reference_recursion(self, f64):
        rng = _rng(3)
        p = rng.normal(size=3)
        ref = p.copy()
        m = v = np.zeros(3)
        st_ = nk.AdamState.like(p)
        for t in range(1, 6):
            g = rng.normal(size=3)
            nk.adam_step(p, g, st_, 0.01)
            m = 0.9 * m + 0.1 * g
            v = 0.999 * v + 0.001 * g * g
            ref = ref - 0.01 * (m / (1 - 0.9 ** t)) / (np.sqrt(v / (1 - 0.999 ** t)) + 1e-8)
        np.testing.assert_allclose(p, ref, rtol=1e-12)

    def test_non_finite_names_parameter(self):
        p = np.zeros(2)
        with pytest.raises(NumericalError, match="layers.0.W1"):
            nk.adam_step(p, np.array([np.nan, 0.0]), nk.AdamState.like(p), 0.1, "layers.0.W1")


class TestGradCheck:
    def test_linear(self, f64):
        c = _rng().normal(size=6)
        assert nk.grad_check(lambda x: (float(c @ x), (c,)), [_rng(1).normal(size=6)]) < 1e-9

    def test_detects_wrong_gradient(self, f64):
        assert nk.grad_check(lambda x: (float((x ** 2).sum()), (x,)), [np.ones(3)]) > 0.1

    @pytest.mark.parametrize("seed", range(3))
    def test_composition(self, f64, seed):
        rng = _rng(seed)
        off = np.array([0, 3, 5])
        w = rng.normal(size=(4, 3))
        h = rng.normal(size=(5, 4))
        r = rng.normal(size=5)

        def f(w, h):
            x = h @ w
            u = nk.leaky_relu(x)
            s = u.sum(axis=1)
            a = nk.segment_softmax(s, off)
            ds = nk.segment_softmax_backward(a, r, off)
            dx = nk.leaky_relu_backward(x, np.repeat(ds[:, None], 3, axis=1))
            dh, dw = nk.matmul_backward(h, w, dx)
            return float((a * r).sum()), (dw, dh)
        assert nk.grad_check(f, [w, h]) < 1e-4


class TestPrecision:
    def test_switch(self):
        assert nk.precision_name() == "float32"
        with nk.precision("float64"):
            assert nk.get_dtype() == np.float64
        assert nk.get_dtype() == np.float32

    def test_unknown(self):
        with pytest.raises(Exception):
            nk.set_precision("float16")

    def test_glorot_bound(self):
        g = nk.Glorot(_rng())
        w = g((30, 40), 40, 30)
        assert np.abs(w).max() <= math.sqrt(6 / 70)
        assert w.dtype == np.float32

    def test_check_finite(self):
        with pytest.raises(NumericalError):
            nk.check_finite(np.array([np.inf]), "x")
