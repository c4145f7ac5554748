import numpy as np
import pytest

from src.kan import TokenizedBlock, detokenize, multikan_forward, tok_block_forward, token_grid, tokenize
from src.tensor import Tensor, ops
from src.utils.errors import ShapeError


def identity_block(channels, patch):
    d = patch * patch * channels
    block = TokenizedBlock(channels, d, patch_size=patch, n_layers=1)
    block.embed.assign(np.eye(d))
    return block


class TestTokenize:
    def test_single_patch(self, rng):
        block = TokenizedBlock(2, 8, patch_size=4)
        tokens = tokenize(Tensor(rng.normal(size=(1, 2, 4, 4))), block)
        assert tokens.shape == (1, 1, 8)

    def test_unit_patches_are_pixels(self, rng):
        x = rng.normal(size=(2, 3, 4, 5))
        tokens = tokenize(Tensor(x), identity_block(3, 1)).data
        assert tokens.shape == (2, 20, 3)
        np.testing.assert_allclose(tokens, x.transpose(0, 2, 3, 1).reshape(2, 20, 3), rtol=1e-6)

    def test_patch_raster_order(self):
        x = np.arange(16, dtype=float).reshape(1, 1, 4, 4)
        tokens = tokenize(Tensor(x), identity_block(1, 2)).data[0]
        expected = [[0, 1, 4, 5], [2, 3, 6, 7], [8, 9, 12, 13], [10, 11, 14, 15]]
        np.testing.assert_array_equal(tokens, expected)

    def test_indivisible_size(self, rng):
        with pytest.raises(ShapeError, match="not divisible"):
            tokenize(Tensor(np.zeros((1, 2, 5, 4))), TokenizedBlock(2, 8, patch_size=2))


class TestDetokenize:
    @pytest.mark.parametrize("channels,patch", [(1, 2), (3, 2), (2, 1), (1, 4)])
    def test_inverts_identity_tokenize(self, rng, channels, patch):
        x = rng.normal(size=(2, channels, 8, 4)).astype(np.float32)
        tokens = tokenize(Tensor(x), identity_block(channels, patch))
        np.testing.assert_array_equal(detokenize(tokens, 8, 4, patch).data, x)

    def test_single_token_is_reshape(self):
        z = Tensor(np.arange(4.0).reshape(1, 1, 4))
        np.testing.assert_array_equal(detokenize(z, 2, 2, 2).data, [[[[0.0, 1.0], [2.0, 3.0]]]])

    def test_inconsistent_dims(self):
        with pytest.raises(ShapeError):
            detokenize(Tensor(np.zeros((1, 3, 4))), 4, 4, 2)


class TestTokenGrid:
    def test_square_inferred(self):
        assert token_grid(16) == (4, 4)

    def test_explicit_grid(self):
        assert token_grid(6, (2, 3)) == (2, 3)

    def test_non_square_needs_grid(self):
        with pytest.raises(ShapeError, match="square"):
            token_grid(6)


class TestBlock:
    def test_zero_branch_reduces_to_layer_norm(self, rng):
        block = TokenizedBlock(1, 8, patch_size=2, n_layers=3, rng=rng)
        block.multikan.zero_()
        block.dwconv.assign(np.zeros_like(block.dwconv.data))
        z = Tensor(rng.normal(size=(1, 4, 8)))
        np.testing.assert_allclose(block(z).data, ops.layer_norm(z).data, rtol=1e-6, atol=1e-6)

    def test_standardized_rows_pass_through(self, rng, float64):
        block = TokenizedBlock(1, 8, patch_size=2, rng=rng)
        block.multikan.zero_()
        block.dwconv.assign(np.zeros_like(block.dwconv.data))
        raw = rng.normal(size=(1, 9, 8))
        z = (raw - raw.mean(-1, keepdims=True)) / raw.std(-1, keepdims=True)
        np.testing.assert_allclose(block(Tensor(z)).data, z, rtol=1e-4, atol=1e-4)

    def test_matches_step_by_step_oracle(self, rng, float64):
        block = TokenizedBlock(2, 8, patch_size=2, n_layers=2, n_mul=2, rng=rng)
        z = Tensor(rng.normal(size=(2, 6, 8)))
        branch = multikan_forward(z, block.multikan.layers).data
        spatial = branch.reshape(2, 2, 3, 8).transpose(0, 3, 1, 2)
        conv = ops.depthwise_conv2d(Tensor(spatial), block.dwconv, block.dwconv_bias).data
        mixed = conv.transpose(0, 2, 3, 1).reshape(2, 6, 8)
        expected = ops.layer_norm(Tensor(z.data + mixed), block.ln_gamma, block.ln_beta).data
        np.testing.assert_allclose(tok_block_forward(z, block, (2, 3)).data, expected, rtol=1e-12)

    def test_token_width_checked(self, rng):
        block = TokenizedBlock(1, 8, patch_size=2, rng=rng)
        with pytest.raises(ShapeError):
            block(Tensor(np.zeros((1, 4, 6))))

    def test_out_channels(self):
        assert TokenizedBlock(3, 32, patch_size=2).out_channels == 8
