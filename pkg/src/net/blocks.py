"""
Network building blocks.

SonoBlock:          X_out = Conv(ODEBlock(X_in))
SonoMultiKanBlock:  ODEBlock -> tokenize -> token block -> detokenize -> Conv

Resampling follows the block direction: "down" uses a stride-2 conv,
"up" upsamples bilinearly before a stride-1 conv, "none" keeps resolution.
"""
from typing import Optional

import numpy as np

from src.kan import BSplineGrid, TokenizedBlock, detokenize, tok_block_forward, tokenize
from src.odeint import DynamicsNet, IntegrationConfig, VelocityNet, sono_integrate
from src.tensor import Module, Parameter, Tensor, ops
from src.utils.errors import ShapeError

DIRECTIONS = ("down", "up", "none")


class Conv2d(Module):
    def __init__(
        self,
        c_in: int,
        c_out: int,
        kernel_size: int = 3,
        rng: Optional[np.random.Generator] = None,
        name: str = "conv",
    ):
        rng = rng if rng is not None else np.random.default_rng(0)
        fan_in = c_in * kernel_size * kernel_size
        self.kernel_size = kernel_size
        self.weight = Parameter(
            rng.normal(0.0, np.sqrt(2.0 / fan_in), (c_out, c_in, kernel_size, kernel_size)),
            name=f"{name}.weight",
        )
        self.bias = Parameter(np.zeros(c_out), name=f"{name}.bias")

    def forward(self, x: Tensor, stride: int = 1) -> Tensor:
        return ops.conv2d(x, self.weight, self.bias, stride=stride, padding=self.kernel_size // 2)


def resample(x: Tensor, conv: Conv2d, direction: str) -> Tensor:
    if direction == "down":
        return conv(x, stride=2)
    if direction == "up":
        return conv(ops.upsample2x(x))
    if direction == "none":
        return conv(x)
    raise ValueError(f"unknown direction {direction!r}; expected one of {DIRECTIONS}")


def _check_input(x: Tensor, channels: int, kind: str) -> None:
    if x.ndim != 4 or x.shape[1] != channels:
        raise ShapeError(f"{kind} expects [N, {channels}, H, W], got {x.shape}")


class SonoBlock(Module):
    def __init__(
        self,
        c_in: int,
        c_out: int,
        direction: str = "down",
        integration: Optional[IntegrationConfig] = None,
        hidden: Optional[int] = None,
        kernel_size: int = 3,
        rng: Optional[np.random.Generator] = None,
        name: str = "sono",
    ):
        if direction not in DIRECTIONS:
            raise ValueError(f"unknown direction {direction!r}; expected one of {DIRECTIONS}")
        rng = rng if rng is not None else np.random.default_rng(0)
        self.c_in = c_in
        self.c_out = c_out
        self.direction = direction
        self.integration = integration or IntegrationConfig()
        self.g = VelocityNet(c_in, rng=rng, name=f"{name}.g")
        self.f = DynamicsNet(c_in, hidden=hidden, use_x=self.integration.use_x, rng=rng, name=f"{name}.f")
        self.conv = Conv2d(c_in, c_out, kernel_size, rng=rng, name=f"{name}.conv")

    def forward(self, x: Tensor) -> Tensor:
        return sono_block_forward(x, self)


class SonoMultiKanBlock(Module):
    def __init__(
        self,
        c_in: int,
        c_out: int,
        embed_dim: int,
        patch_size: int = 2,
        direction: str = "down",
        integration: Optional[IntegrationConfig] = None,
        grid: Optional[BSplineGrid] = None,
        n_mul: Optional[int] = None,
        mul_arity: int = 2,
        kan_layers: int = 3,
        dw_kernel: int = 3,
        hidden: Optional[int] = None,
        rng: Optional[np.random.Generator] = None,
        name: str = "sono_kan",
    ):
        if direction not in DIRECTIONS:
            raise ValueError(f"unknown direction {direction!r}; expected one of {DIRECTIONS}")
        rng = rng if rng is not None else np.random.default_rng(0)
        self.c_in = c_in
        self.c_out = c_out
        self.direction = direction
        self.integration = integration or IntegrationConfig()
        self.g = VelocityNet(c_in, rng=rng, name=f"{name}.g")
        self.f = DynamicsNet(c_in, hidden=hidden, use_x=self.integration.use_x, rng=rng, name=f"{name}.f")
        self.tok = TokenizedBlock(
            c_in,
            embed_dim,
            patch_size=patch_size,
            n_layers=kan_layers,
            n_mul=n_mul,
            mul_arity=mul_arity,
            grid=grid,
            dw_kernel=dw_kernel,
            rng=rng,
            name=f"{name}.tok",
        )
        self.conv = Conv2d(self.tok.out_channels, c_out, 3, rng=rng, name=f"{name}.conv")

    def forward(self, x: Tensor) -> Tensor:
        return sono_multikan_block_forward(x, self)


def sono_block_forward(x: Tensor, block: SonoBlock, direction: Optional[str] = None) -> Tensor:
    _check_input(x, block.c_in, "SONO block")
    features = sono_integrate(x, block.g, block.f, block.integration)
    return resample(features, block.conv, direction or block.direction)


def sono_multikan_block_forward(
    x: Tensor,
    block: SonoMultiKanBlock,
    direction: Optional[str] = None,
) -> Tensor:
    _check_input(x, block.c_in, "SONO-MultiKAN block")
    _, _, h, w = x.shape
    k = block.tok.patch_size
    if h % k or w % k:
        raise ShapeError(f"spatial size {h}x{w} is not divisible by patch size {k}")
    features = sono_integrate(x, block.g, block.f, block.integration)
    tokens = tokenize(features, block.tok)
    tokens = tok_block_forward(tokens, block.tok, grid_hw=(h // k, w // k))
    spatial = detokenize(tokens, h, w, k)
    return resample(spatial, block.conv, direction or block.direction)


def bottleneck_forward(x: Tensor, block: SonoMultiKanBlock) -> Tensor:
    """One SONO-MultiKAN block at constant resolution."""
    return sono_multikan_block_forward(x, block, "none")
