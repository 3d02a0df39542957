import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from tinysv import ops
from tinysv.errors import ShapeError
from tinysv.ops import (BatchNormParams, DepthwiseKernel, PointwiseKernel, PReluParams,
                        batch_norm_infer, depthwise_conv1d, fold_batch_norm, max_pool1d, mfm,
                        pointwise_conv1d, prelu, time_mask)

EPS = 1e-5
f32 = np.float32


def naive_depthwise(x, w, padding):
    t_len, c_len = x.shape
    k = w.shape[1]
    offset = (k - 1) // 2 if padding == "same" else k - 1
    out = np.zeros((t_len, c_len))
    for t in range(t_len):
        for c in range(c_len):
            for j in range(k):
                src = t + j - offset
                if 0 <= src < t_len:
                    out[t, c] += w[c, j] * x[src, c]
    return out


def bn(n, gamma=1.0, beta=0.0, mean=0.0, var=1.0 - EPS):
    full = lambda v: np.full(n, v, dtype=f32)
    return BatchNormParams(full(gamma), full(beta), full(mean), full(var), EPS)


class TestDepthwise:
    def test_identity_kernel(self, rng):
        x = rng.normal(size=(9, 4)).astype(f32)
        w = np.zeros((4, 15), f32)
        w[:, 7] = 1
        np.testing.assert_array_equal(depthwise_conv1d(x, DepthwiseKernel(w)), x)

    def test_zero_kernel(self, rng):
        x = rng.normal(size=(9, 4)).astype(f32)
        out = depthwise_conv1d(x, DepthwiseKernel(np.zeros((4, 5), f32)))
        np.testing.assert_array_equal(out, 0)

    @pytest.mark.parametrize("padding", ["same", "causal"])
    def test_naive_oracle(self, rng, padding):
        x = rng.normal(size=(5, 8)).astype(f32)
        w = rng.normal(size=(8, 3)).astype(f32)
        out = depthwise_conv1d(x, DepthwiseKernel(w), padding)
        assert out.shape == x.shape
        np.testing.assert_allclose(out, naive_depthwise(x, w, padding), atol=1e-6)

    def test_naive_oracle_long_kernel(self, rng):
        x = rng.normal(size=(20, 3)).astype(f32)
        w = rng.normal(size=(3, 15)).astype(f32)
        np.testing.assert_allclose(depthwise_conv1d(x, DepthwiseKernel(w)),
                                   naive_depthwise(x, w, "same"), atol=1e-5)

    @pytest.mark.parametrize("padding, lo, hi", [("same", -3, 3), ("causal", -6, 0)])
    def test_locality_by_perturbation(self, rng, padding, lo, hi):
        x = rng.normal(size=(30, 2)).astype(f32)
        w = rng.normal(size=(2, 7)).astype(f32) + 0.1
        base = depthwise_conv1d(x, DepthwiseKernel(w), padding)
        x2 = x.copy()
        x2[15] += 1.0
        changed = np.flatnonzero(np.any(depthwise_conv1d(x2, DepthwiseKernel(w), padding) != base, 1))
        assert set(changed) <= set(range(15 - hi, 15 - lo + 1))
        assert len(changed) > 0

    def test_channel_mismatch(self):
        with pytest.raises(ShapeError):
            depthwise_conv1d(np.zeros((4, 3), f32), DepthwiseKernel(np.zeros((2, 3), f32)))


class TestPointwise:
    def test_identity(self, rng):
        x = rng.normal(size=(6, 5)).astype(f32)
        k = PointwiseKernel(np.eye(5, dtype=f32), np.zeros(5, f32))
        np.testing.assert_array_equal(pointwise_conv1d(x, k), x)

    def test_channel_sum(self, rng):
        x = rng.normal(size=(6, 5)).astype(f32)
        k = PointwiseKernel(np.ones((1, 5), f32), np.zeros(1, f32))
        np.testing.assert_allclose(pointwise_conv1d(x, k)[:, 0], x.sum(1), atol=1e-6)

    def test_matrix_oracle(self, rng):
        x = rng.normal(size=(7, 4)).astype(f32)
        w = rng.normal(size=(3, 4)).astype(f32)
        b = rng.normal(size=3).astype(f32)
        expect = [[sum(w[o, i] * x[t, i] for i in range(4)) + b[o] for o in range(3)]
                  for t in range(7)]
        np.testing.assert_allclose(pointwise_conv1d(x, PointwiseKernel(w, b)), expect, atol=1e-6)

    def test_shape_error(self):
        with pytest.raises(ShapeError):
            pointwise_conv1d(np.zeros((2, 3), f32), PointwiseKernel(np.zeros((2, 4), f32),
                                                                    np.zeros(2, f32)))


class TestBatchNorm:
    def test_identity(self, rng):
        x = rng.normal(size=(5, 3)).astype(f32)
        np.testing.assert_allclose(batch_norm_infer(x, bn(3)), x, rtol=1e-6)

    def test_zero_gamma(self, rng):
        x = rng.normal(size=(5, 3)).astype(f32)
        np.testing.assert_array_equal(batch_norm_infer(x, bn(3, gamma=0, beta=0.7)), f32(0.7))

    def test_scalar_oracle(self, rng):
        x = rng.normal(size=(4, 3)).astype(f32)
        g, b, m = (rng.normal(size=3).astype(f32) for _ in range(3))
        v = rng.uniform(0.1, 2, 3).astype(f32)
        out = batch_norm_infer(x, BatchNormParams(g, b, m, v, EPS))
        for t in range(4):
            for c in range(3):
                ref = g[c] * (x[t, c] - m[c]) / np.sqrt(v[c] + EPS) + b[c]
                assert abs(out[t, c] - ref) <= 1e-6

    def test_shape_error(self):
        with pytest.raises(ShapeError):
            batch_norm_infer(np.zeros((2, 4), f32), bn(3))


class TestFold:
    def _random(self, rng, cin=6, cout=4):
        k = PointwiseKernel(rng.normal(size=(cout, cin)).astype(f32),
                            rng.normal(size=cout).astype(f32))
        p = BatchNormParams(rng.normal(size=cout).astype(f32), rng.normal(size=cout).astype(f32),
                            rng.normal(size=cout).astype(f32),
                            rng.uniform(0.2, 3, cout).astype(f32), EPS)
        return k, p

    def test_identity_bn(self, rng):
        k, _ = self._random(rng)
        folded = fold_batch_norm(k, bn(4))
        np.testing.assert_allclose(folded.weights, k.weights, rtol=1e-6)
        np.testing.assert_allclose(folded.bias, k.bias, rtol=1e-6)

    def test_doubling(self, rng):
        k, _ = self._random(rng)
        folded = fold_batch_norm(k, bn(4, gamma=2))
        np.testing.assert_allclose(folded.weights, 2 * k.weights, rtol=1e-6)
        np.testing.assert_allclose(folded.bias, 2 * k.bias, rtol=1e-6)

    def test_equivalence_100_cases(self, rng):
        for _ in range(100):
            k, p = self._random(rng)
            x = rng.normal(size=(10, 6)).astype(f32)
            np.testing.assert_allclose(pointwise_conv1d(x, fold_batch_norm(k, p)),
                                       batch_norm_infer(pointwise_conv1d(x, k), p),
                                       atol=1e-5, rtol=1e-5)

    def test_shape_error(self, rng):
        k, _ = self._random(rng)
        with pytest.raises(ShapeError):
            fold_batch_norm(k, bn(5))


class TestActivations:
    def test_prelu_nonnegative_identity(self, rng):
        x = np.abs(rng.normal(size=(4, 3))).astype(f32)
        np.testing.assert_array_equal(prelu(x, PReluParams(np.full(3, 0.3, f32))), x)

    def test_prelu_relu(self, rng):
        x = rng.normal(size=(4, 3)).astype(f32)
        np.testing.assert_array_equal(prelu(x, PReluParams(np.zeros(3, f32))), np.maximum(x, 0))

    def test_prelu_arithmetic(self):
        assert prelu(np.array([[-2.0]], f32), PReluParams(np.array([0.25], f32)))[0, 0] == -0.5

    def test_mfm_example(self):
        np.testing.assert_array_equal(mfm(np.array([[1, 3, 2, 0]], f32)), [[2, 3]])

    def test_mfm_oracle(self, rng):
        x = rng.normal(size=(5, 6)).astype(f32)
        expect = [[max(x[t, c], x[t, c + 3]) for c in range(3)] for t in range(5)]
        np.testing.assert_array_equal(mfm(x), expect)

    @settings(max_examples=50)
    @given(arrays(np.float32, st.tuples(st.integers(1, 6), st.integers(1, 5)),
                  elements=st.floats(-1e3, 1e3, width=32)))
    def test_mfm_of_duplicate(self, a):
        np.testing.assert_array_equal(mfm(np.concatenate([a, a], axis=1)), a)

    def test_mfm_odd(self):
        with pytest.raises(ShapeError):
            mfm(np.zeros((2, 3), f32))

    def test_pool_example(self):
        np.testing.assert_array_equal(max_pool1d(np.array([[1], [3], [2], [0]], f32)), [[3], [2]])

    def test_pool_floor(self):
        assert max_pool1d(np.zeros((5, 2), f32)).shape == (2, 2)

    def test_pool_oracle(self, rng):
        x = rng.normal(size=(9, 3)).astype(f32)
        expect = [[max(x[2 * t, c], x[2 * t + 1, c]) for c in range(3)] for t in range(4)]
        np.testing.assert_array_equal(max_pool1d(x), expect)


class TestTimeMask:
    def test_empty(self, rng):
        x = rng.normal(size=(4, 2)).astype(f32)
        np.testing.assert_array_equal(time_mask(x, []), x)

    def test_full(self, rng):
        np.testing.assert_array_equal(time_mask(rng.normal(size=(4, 2)), [(0, 4)]), 0)

    def test_span(self, rng):
        x = rng.normal(size=(4, 2)).astype(f32)
        out = time_mask(x, [(1, 2)])
        np.testing.assert_array_equal(out[1:3], 0)
        np.testing.assert_array_equal(out[[0, 3]], x[[0, 3]])


def test_pad_amounts():
    assert ops.pad_amounts(15, "same") == (7, 7)
    assert ops.pad_amounts(15, "causal") == (14, 0)
