import numpy as np
import pytest

from src.tensor import Tensor, default_dtype, ops, precision
from src.utils.errors import ShapeError


def naive_conv(x, w, b=None, stride=1, padding=0):
    n, c, h, wd = x.shape
    co, ci, kh, kw = w.shape
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    ho = (h + 2 * padding - kh) // stride + 1
    wo = (wd + 2 * padding - kw) // stride + 1
    out = np.zeros((n, co, ho, wo))
    for b_ in range(n):
        for o in range(co):
            for i in range(ho):
                for j in range(wo):
                    acc = 0.0
                    for ch in range(ci):
                        for u in range(kh):
                            for v in range(kw):
                                acc += xp[b_, ch, i * stride + u, j * stride + v] * w[o, ch, u, v]
                    out[b_, o, i, j] = acc + (0.0 if b is None else b[o])
    return out


class TestPrecision:
    def test_default_is_float32(self):
        assert default_dtype() == np.float32
        assert Tensor([1.0, 2.0]).dtype == np.float32

    def test_context_switches_and_restores(self):
        with precision("float64"):
            assert Tensor([1.0]).dtype == np.float64
        assert Tensor([1.0]).dtype == np.float32

    def test_scalar_becomes_rank_one(self):
        assert Tensor(3.0).shape == (1,)


class TestConv2d:
    def test_scaling_kernel(self):
        x = Tensor(np.ones((1, 1, 3, 3)))
        out = ops.conv2d(x, Tensor(np.full((1, 1, 1, 1), 2.0)))
        np.testing.assert_array_equal(out.data, np.full((1, 1, 3, 3), 2.0))

    def test_identity_kernel_with_stride_subsamples(self, rng):
        x = rng.normal(size=(1, 1, 4, 4))
        out = ops.conv2d(Tensor(x), Tensor(np.ones((1, 1, 1, 1))), stride=2)
        np.testing.assert_allclose(out.data, x[:, :, ::2, ::2], rtol=1e-6)

    @pytest.mark.parametrize("stride,padding", [(1, 0), (1, 1), (2, 1)])
    def test_matches_nested_loop_oracle(self, rng, float64, stride, padding):
        x = rng.normal(size=(1, 2, 5, 5))
        w = rng.normal(size=(3, 2, 3, 3))
        b = rng.normal(size=3)
        out = ops.conv2d(Tensor(x), Tensor(w), Tensor(b), stride=stride, padding=padding)
        np.testing.assert_allclose(out.data, naive_conv(x, w, b, stride, padding), rtol=1e-12, atol=1e-12)

    def test_channel_mismatch_raises(self):
        with pytest.raises(ShapeError, match="input channels"):
            ops.conv2d(Tensor(np.ones((1, 2, 3, 3))), Tensor(np.ones((1, 3, 1, 1))))


class TestDepthwiseConv:
    def test_identity_kernels(self, rng):
        x = rng.normal(size=(2, 3, 4, 5))
        w = np.zeros((3, 1, 3, 3))
        w[:, 0, 1, 1] = 1.0
        out = ops.depthwise_conv2d(Tensor(x), Tensor(w))
        np.testing.assert_allclose(out.data, x, rtol=1e-6)

    def test_channel_isolation(self, rng):
        x = rng.normal(size=(1, 2, 4, 4))
        w = np.zeros((2, 1, 3, 3))
        w[1, 0, 1, 1] = 1.0
        out = ops.depthwise_conv2d(Tensor(x), Tensor(w)).data
        np.testing.assert_array_equal(out[:, 0], 0.0)
        np.testing.assert_allclose(out[:, 1], x[:, 1], rtol=1e-6)

    def test_matches_grouped_oracle(self, rng, float64):
        x = rng.normal(size=(1, 3, 5, 4))
        w = rng.normal(size=(3, 1, 3, 3))
        out = ops.depthwise_conv2d(Tensor(x), Tensor(w)).data
        for c in range(3):
            expected = naive_conv(x[:, c:c + 1], w[c:c + 1], padding=1)
            np.testing.assert_allclose(out[:, c:c + 1], expected, rtol=1e-12, atol=1e-12)

    def test_even_kernel_rejected(self):
        with pytest.raises(ShapeError, match="odd"):
            ops.depthwise_conv2d(Tensor(np.ones((1, 1, 4, 4))), Tensor(np.ones((1, 1, 2, 2))))


class TestLinear:
    def test_identity_weight(self, rng):
        x = rng.normal(size=(4, 3))
        out = ops.linear(Tensor(x), Tensor(np.eye(3)), Tensor(np.zeros(3)))
        np.testing.assert_allclose(out.data, x, rtol=1e-6)

    def test_zero_weight_gives_bias_rows(self):
        b = np.array([1.0, -2.0])
        out = ops.linear(Tensor(np.ones((5, 3))), Tensor(np.zeros((3, 2))), Tensor(b))
        np.testing.assert_array_equal(out.data, np.tile(b, (5, 1)))

    def test_matches_triple_loop(self, rng, float64):
        x = rng.normal(size=(4, 3))
        w = rng.normal(size=(3, 2))
        expected = np.zeros((4, 2))
        for i in range(4):
            for j in range(2):
                for k in range(3):
                    expected[i, j] += x[i, k] * w[k, j]
        np.testing.assert_allclose(ops.linear(Tensor(x), Tensor(w)).data, expected, rtol=1e-12)

    def test_trailing_mismatch(self):
        with pytest.raises(ShapeError, match="trailing extent"):
            ops.linear(Tensor(np.ones((2, 3))), Tensor(np.ones((4, 2))))


class TestLayerNorm:
    def test_constant_row_collapses_to_zero(self):
        out = ops.layer_norm(Tensor(np.full((2, 4), 7.0)), Tensor(np.ones(4)), Tensor(np.zeros(4)))
        np.testing.assert_allclose(out.data, 0.0, atol=1e-6)

    def test_normalized_row_is_fixed_point(self, float64):
        out = ops.layer_norm(Tensor([[1.0, -1.0]]), eps=1e-12)
        np.testing.assert_allclose(out.data, [[1.0, -1.0]], rtol=1e-9)

    def test_two_pass_oracle(self, rng, float64):
        x = rng.normal(size=(3, 6))
        gamma, beta = rng.normal(size=6), rng.normal(size=6)
        mu = x.sum(axis=1, keepdims=True) / 6
        var = ((x - mu) ** 2).sum(axis=1, keepdims=True) / 6
        expected = gamma * (x - mu) / np.sqrt(var + 1e-5) + beta
        out = ops.layer_norm(Tensor(x), Tensor(gamma), Tensor(beta))
        np.testing.assert_allclose(out.data, expected, rtol=1e-10)


class TestElementwise:
    def test_activation_fixed_points(self):
        zero = Tensor([0.0])
        assert ops.elementwise(zero, "sigmoid").item() == 0.5
        assert ops.elementwise(zero, "silu").item() == 0.0

    def test_mul_by_zeros(self, rng):
        x = Tensor(rng.normal(size=(3, 2)))
        out = ops.elementwise(x, "mul", Tensor(np.zeros((3, 2))))
        np.testing.assert_array_equal(out.data, 0.0)

    def test_binary_shape_mismatch(self):
        with pytest.raises(ShapeError):
            ops.elementwise(Tensor(np.ones(3)), "add", Tensor(np.ones(2)))

    def test_unknown_kind(self):
        with pytest.raises(ValueError, match="unknown elementwise kind"):
            ops.elementwise(Tensor(np.ones(3)), "tanh")


class TestConcatChannels:
    def test_empty_second_operand(self, rng):
        x = rng.normal(size=(1, 2, 3, 3))
        out = ops.concat_channels(Tensor(x), Tensor(np.zeros((1, 0, 3, 3))))
        np.testing.assert_allclose(out.data, x, rtol=1e-6)

    def test_channel_order(self):
        out = ops.concat_channels(Tensor(np.ones((1, 1, 2, 2))), Tensor(np.zeros((1, 1, 2, 2)))).data
        np.testing.assert_array_equal(out[0, 0], 1.0)
        np.testing.assert_array_equal(out[0, 1], 0.0)

    def test_spatial_mismatch(self):
        with pytest.raises(ShapeError):
            ops.concat_channels(Tensor(np.ones((1, 1, 2, 2))), Tensor(np.ones((1, 1, 3, 2))))


class TestUpsample:
    def test_constant_stays_constant(self):
        out = ops.upsample2x(Tensor(np.full((1, 2, 3, 4), 5.0)))
        assert out.shape == (1, 2, 6, 8)
        np.testing.assert_allclose(out.data, 5.0, rtol=1e-6)

    def test_single_pixel(self):
        out = ops.upsample2x(Tensor([[[[2.5]]]]))
        np.testing.assert_allclose(out.data, np.full((1, 1, 2, 2), 2.5))

    def test_ramp_matches_bilinear_weights(self, float64):
        ramp = Tensor(np.array([[[[0.0, 1.0], [2.0, 3.0]]]]))
        expected = np.array(
            [
                [0.0, 0.25, 0.75, 1.0],
                [0.5, 0.75, 1.25, 1.5],
                [1.5, 1.75, 2.25, 2.5],
                [2.0, 2.25, 2.75, 3.0],
            ]
        )
        np.testing.assert_allclose(ops.upsample2x(ramp).data[0, 0], expected, rtol=1e-12)


class TestGroupNorm:
    def test_single_group_equals_layer_norm_over_map(self, rng, float64):
        x = rng.normal(size=(2, 3, 2, 2))
        out = ops.group_norm(Tensor(x), 1).data
        flat = x.reshape(2, -1)
        expected = (flat - flat.mean(1, keepdims=True)) / np.sqrt(flat.var(1, keepdims=True) + 1e-5)
        np.testing.assert_allclose(out.reshape(2, -1), expected, rtol=1e-10)

    def test_indivisible_groups(self):
        with pytest.raises(ShapeError):
            ops.group_norm(Tensor(np.ones((1, 3, 2, 2))), 2)
