import numpy as np
import pytest

from src.kan import detokenize, tok_block_forward, tokenize
from src.net import (
    ModelConfig,
    SonoBlock,
    SonoMultiKanBlock,
    bottleneck_forward,
    build_model,
    model_forward,
    predict_masks,
    sono_block_forward,
    sono_multikan_block_forward,
    tiny_config,
)
from src.odeint import IntegrationConfig, sono_integrate
from src.tensor import Tape, Tensor, backward, grad_of, ops
from src.utils.errors import ConfigError, ShapeError
from src.verify.gradcheck import audit_model


def centre_identity(channels, k):
    w = np.zeros((channels, channels, k, k))
    for c in range(channels):
        w[c, c, k // 2, k // 2] = 1.0
    return w


class TestSonoBlock:
    def test_frozen_block_with_identity_conv(self, rng, float64):
        block = SonoBlock(3, 3, "none", kernel_size=1, rng=rng)
        block.zero_()
        block.conv.weight.assign(centre_identity(3, 1))
        x = rng.normal(size=(1, 3, 5, 5))
        np.testing.assert_array_equal(sono_block_forward(Tensor(x), block).data, x)

    def test_down_halves_resolution(self, rng):
        block = SonoBlock(2, 5, "down", IntegrationConfig(steps=1), rng=rng)
        assert block(Tensor(rng.normal(size=(1, 2, 8, 8)))).shape == (1, 5, 4, 4)

    def test_up_doubles_resolution(self, rng):
        block = SonoBlock(2, 3, "up", IntegrationConfig(steps=1), rng=rng)
        assert block(Tensor(rng.normal(size=(2, 2, 4, 6)))).shape == (2, 3, 8, 12)

    def test_composition_oracle(self, rng, float64):
        block = SonoBlock(2, 4, "down", IntegrationConfig(steps=2), rng=rng)
        x = Tensor(rng.normal(size=(1, 2, 6, 6)))
        features = sono_integrate(x, block.g, block.f, block.integration)
        manual = ops.conv2d(features, block.conv.weight, block.conv.bias, stride=2, padding=1)
        np.testing.assert_array_equal(block(x).data, manual.data)

    def test_channel_mismatch(self, rng):
        with pytest.raises(ShapeError, match="SONO block"):
            SonoBlock(2, 4, rng=rng)(Tensor(np.zeros((1, 3, 4, 4))))

    def test_unknown_direction(self):
        with pytest.raises(ValueError, match="direction"):
            SonoBlock(2, 2, "sideways")


class TestSonoMultiKanBlock:
    def test_shape_contract(self, rng):
        block = SonoMultiKanBlock(64, 32, 64, patch_size=2, integration=IntegrationConfig(steps=1), rng=rng)
        assert block(Tensor(rng.normal(size=(1, 64, 16, 16)))).shape == (1, 32, 8, 8)

    def test_residual_isolation(self, rng, float64):
        block = SonoMultiKanBlock(2, 2, 8, patch_size=2, direction="none", rng=rng)
        block.g.zero_()
        block.f.zero_()
        block.tok.multikan.zero_()
        block.tok.dwconv.assign(np.zeros_like(block.tok.dwconv.data))
        block.tok.embed.assign(np.eye(8))
        block.conv.weight.assign(centre_identity(2, 3))
        x = Tensor(rng.normal(size=(1, 2, 4, 4)))
        tokens = tokenize(x, block.tok)
        expected = detokenize(ops.layer_norm(tokens, block.tok.ln_gamma, block.tok.ln_beta), 4, 4, 2)
        np.testing.assert_allclose(block(x).data, expected.data, rtol=1e-12, atol=1e-12)

    def test_five_stage_chain(self, rng, float64):
        block = SonoMultiKanBlock(2, 3, 8, patch_size=2, direction="up", integration=IntegrationConfig(steps=2), rng=rng)
        x = Tensor(rng.normal(size=(1, 2, 4, 6)))
        features = sono_integrate(x, block.g, block.f, block.integration)
        tokens = tok_block_forward(tokenize(features, block.tok), block.tok, (2, 3))
        spatial = ops.upsample2x(detokenize(tokens, 4, 6, 2))
        manual = ops.conv2d(spatial, block.conv.weight, block.conv.bias, padding=1)
        np.testing.assert_array_equal(sono_multikan_block_forward(x, block).data, manual.data)

    def test_bottleneck_keeps_resolution(self, rng):
        block = SonoMultiKanBlock(4, 4, 16, patch_size=2, integration=IntegrationConfig(steps=1), rng=rng)
        x = Tensor(rng.normal(size=(1, 4, 4, 4)))
        assert bottleneck_forward(x, block).shape == x.shape

    def test_patch_divisibility(self, rng):
        block = SonoMultiKanBlock(2, 2, 8, patch_size=2, rng=rng)
        with pytest.raises(ShapeError, match="patch size"):
            block(Tensor(np.zeros((1, 2, 5, 4))))

    def test_retained_buffers_independent_of_steps(self, rng):
        counts = []
        for steps in (2, 16):
            block = SonoMultiKanBlock(
                2, 2, 8, patch_size=2, integration=IntegrationConfig(steps=steps), rng=np.random.default_rng(0)
            )
            with Tape() as tape:
                block(Tensor(rng.normal(size=(1, 2, 4, 4)), requires_grad=True))
            counts.append(tape.retained_buffers())
        assert counts[0] == counts[1]


class TestModelConfig:
    def test_defaults_are_valid(self):
        cfg = ModelConfig()
        assert cfg.depth == 5
        cfg.check_input_size(64, 64)

    def test_channel_count_mismatch(self):
        with pytest.raises(ConfigError, match="encoder_channels"):
            ModelConfig(encoder_channels=[8, 16])

    def test_embed_dim_multiple_of_patch_area(self):
        with pytest.raises(ConfigError, match="multiple"):
            ModelConfig(embed_dims=[64, 128, 126])

    def test_indivisible_input(self):
        with pytest.raises(ShapeError, match="divisible"):
            ModelConfig().check_input_size(48, 64)

    def test_bottleneck_patch_needs_larger_input(self):
        cfg = ModelConfig()
        assert cfg.min_input_multiple() == 64
        with pytest.raises(ShapeError, match=r"bottleneck runs at 1x1.*multiples of 64"):
            cfg.check_input_size(32, 32)

    def test_decoder_stages_are_checked(self):
        cfg = ModelConfig(
            in_channels=1,
            encoder_channels=[4, 4],
            n_sono_blocks=0,
            n_tok_blocks=2,
            patch_sizes=[4, 1],
            embed_dims=[16, 8],
        )
        assert ("decoder.1", 1, 4) in cfg.tokenized_stages()
        cfg.check_input_size(8, 8)
        with pytest.raises(ShapeError, match=r"decoder\.1 runs at 2x2.*multiples of 8"):
            cfg.check_input_size(4, 4)

    def test_tiny_stages(self):
        assert tiny_config().tokenized_stages() == [
            ("encoder.1", 1, 2),
            ("encoder.2", 2, 2),
            ("bottleneck", 3, 2),
            ("decoder.0", 3, 2),
            ("decoder.1", 2, 2),
        ]
        assert tiny_config().min_input_multiple() == 16

    def test_dict_round_trip_restores_nested_configs(self):
        cfg = tiny_config()
        restored = ModelConfig.from_dict(cfg.to_dict())
        assert restored == cfg
        assert isinstance(restored.integration, IntegrationConfig)


class TestModel:
    def test_logit_shape(self, rng):
        model = build_model(tiny_config(), seed=1)
        assert model(Tensor(rng.uniform(size=(2, 1, 16, 16)))).shape == (2, 1, 16, 16)

    def test_non_square_input(self, rng):
        model = build_model(tiny_config(), seed=1)
        assert model(Tensor(rng.uniform(size=(1, 1, 16, 32)))).shape == (1, 1, 16, 32)

    def test_deterministic(self, rng):
        model = build_model(tiny_config(), seed=3)
        image = Tensor(rng.uniform(size=(1, 1, 16, 16)))
        np.testing.assert_array_equal(model(image).data, model(image).data)

    def test_same_seed_same_weights(self):
        a, b = build_model(tiny_config(), seed=5), build_model(tiny_config(), seed=5)
        for (name, p), (_, q) in zip(a.named_parameters(), b.named_parameters()):
            np.testing.assert_array_equal(p.data, q.data, err_msg=name)

    def test_wrong_channels(self, rng):
        model = build_model(tiny_config(), seed=1)
        with pytest.raises(ShapeError):
            model(Tensor(np.zeros((1, 3, 16, 16))))

    def test_every_parameter_group_receives_gradient(self, rng, float64):
        model = build_model(tiny_config(), seed=2)
        image = Tensor(rng.uniform(size=(1, 1, 16, 16)))
        target = Tensor((rng.uniform(size=(1, 1, 16, 16)) > 0.5).astype(float))
        with Tape() as tape:
            logits = model(image)
            loss = ops.mean(ops.mul(ops.sub(ops.sigmoid(logits), target), ops.sub(ops.sigmoid(logits), target)))
        grads = backward(tape, loss)
        dead = [
            group
            for group, params in model.parameter_groups().items()
            if not any(np.any(grad_of(grads, p) != 0) for p in params)
        ]
        assert dead == []

    def test_skips_are_wired(self, rng):
        model = build_model(tiny_config(), seed=4)
        image = Tensor(rng.uniform(size=(1, 1, 16, 16)))
        full = model_forward(image, model).data
        for level in range(model.cfg.depth):
            assert not np.array_equal(model_forward(image, model, ablate_skip=level).data, full)

    def test_predict_masks_binary(self, rng):
        model = build_model(tiny_config(), seed=1)
        masks = predict_masks(model, Tensor(rng.uniform(size=(2, 1, 16, 16))))
        assert masks.shape == (2, 16, 16)
        assert masks.dtype == np.uint8
        assert set(np.unique(masks)) <= {0, 1}

    def test_full_model_gradients_match_finite_differences(self):
        result = audit_model(seed=0, n_samples=20)["model"]
        assert result.max_rel_error < 1e-3
