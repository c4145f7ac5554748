"""
Tokenized MultiKAN block.

A feature map [N, C, H, W] is cut into M = H*W/K^2 non-overlapping K x K
patches in raster order. Each patch is flattened in (row, column, channel)
order and linearly embedded to d dimensions. The block then applies

    Z_k = LN(Z_{k-1} + DwConv(MultiKAN(Z_{k-1})))

where DwConv runs on the tokens laid back out on their (H/K, W/K) grid.
"""
import math
from typing import Optional, Tuple

import numpy as np

from src.tensor import Module, Parameter, Tensor, ops
from src.utils.errors import ShapeError

from .grid import BSplineGrid
from .layers import MultiKan, MultiKanLayer, multikan_forward


class TokenizedBlock(Module):
    def __init__(
        self,
        in_channels: int,
        embed_dim: int,
        patch_size: int = 2,
        n_layers: int = 3,
        n_mul: Optional[int] = None,
        mul_arity: int = 2,
        grid: Optional[BSplineGrid] = None,
        dw_kernel: int = 3,
        rng: Optional[np.random.Generator] = None,
        name: str = "tok",
    ):
        if patch_size < 1:
            raise ShapeError(f"patch size must be >= 1, got {patch_size}")
        rng = rng if rng is not None else np.random.default_rng(0)
        d = embed_dim
        n_mul = d // 8 if n_mul is None else n_mul
        n_add = d - n_mul
        if n_add < 0:
            raise ShapeError(f"n_mul={n_mul} exceeds embed_dim={d}")
        self.in_channels = in_channels
        self.embed_dim = d
        self.patch_size = patch_size

        fan_in = patch_size * patch_size * in_channels
        self.embed = Parameter(rng.normal(0.0, 1.0 / np.sqrt(fan_in), (fan_in, d)), name=f"{name}.embed")
        self.embed_bias = Parameter(np.zeros(d), name=f"{name}.embed_bias")
        self.multikan = MultiKan(
            [
                MultiKanLayer.build(d, n_add, n_mul, mul_arity, grid=grid, rng=rng, name=f"{name}.multikan.{l}")
                for l in range(n_layers)
            ]
        )
        self.dwconv = Parameter(
            rng.normal(0.0, 1.0 / dw_kernel, (d, 1, dw_kernel, dw_kernel)), name=f"{name}.dwconv"
        )
        self.dwconv_bias = Parameter(np.zeros(d), name=f"{name}.dwconv_bias")
        self.ln_gamma = Parameter(np.ones(d), name=f"{name}.ln_gamma")
        self.ln_beta = Parameter(np.zeros(d), name=f"{name}.ln_beta")

    @property
    def out_channels(self) -> int:
        """Channels after detokenize: d / K^2."""
        return self.embed_dim // (self.patch_size * self.patch_size)

    def forward(self, z: Tensor, grid_hw: Optional[Tuple[int, int]] = None) -> Tensor:
        return tok_block_forward(z, self, grid_hw)


def tokenize(x: Tensor, params: TokenizedBlock) -> Tensor:
    if x.ndim != 4:
        raise ShapeError(f"tokenize needs NCHW input, got {x.shape}")
    n, c, h, w = x.shape
    k = params.patch_size
    if h % k or w % k:
        raise ShapeError(f"spatial size {h}x{w} is not divisible by patch size {k}")
    if c != params.in_channels:
        raise ShapeError(f"tokenize expects {params.in_channels} channels, got {c}")
    patches = ops.reshape(x, (n, c, h // k, k, w // k, k))
    patches = ops.permute(patches, (0, 2, 4, 3, 5, 1))
    patches = ops.reshape(patches, (n, (h // k) * (w // k), k * k * c))
    return ops.linear(patches, params.embed, params.embed_bias)


def detokenize(z: Tensor, h: int, w: int, k: int) -> Tensor:
    if z.ndim != 3:
        raise ShapeError(f"detokenize needs [N, M, d] tokens, got {z.shape}")
    n, m, d = z.shape
    if h % k or w % k or m * k * k != h * w:
        raise ShapeError(f"{m} tokens of patch size {k} cannot tile a {h}x{w} map")
    if d % (k * k):
        raise ShapeError(f"token width {d} is not a multiple of K^2 = {k * k}")
    c = d // (k * k)
    grid = ops.reshape(z, (n, h // k, w // k, k, k, c))
    grid = ops.permute(grid, (0, 5, 1, 3, 2, 4))
    return ops.reshape(grid, (n, c, h, w))


def token_grid(m: int, grid_hw: Optional[Tuple[int, int]] = None) -> Tuple[int, int]:
    if grid_hw is not None:
        gh, gw = grid_hw
        if gh * gw != m:
            raise ShapeError(f"token grid {gh}x{gw} does not hold {m} tokens")
        return gh, gw
    side = math.isqrt(m)
    if side * side != m:
        raise ShapeError(f"{m} tokens do not form a square grid; pass grid_hw")
    return side, side


def tok_block_forward(
    z_prev: Tensor,
    params: TokenizedBlock,
    grid_hw: Optional[Tuple[int, int]] = None,
) -> Tensor:
    if z_prev.ndim != 3 or z_prev.shape[-1] != params.embed_dim:
        raise ShapeError(f"token block expects [N, M, {params.embed_dim}], got {z_prev.shape}")
    n, m, d = z_prev.shape
    gh, gw = token_grid(m, grid_hw)

    branch = multikan_forward(z_prev, params.multikan.layers)
    spatial = ops.permute(ops.reshape(branch, (n, gh, gw, d)), (0, 3, 1, 2))
    spatial = ops.depthwise_conv2d(spatial, params.dwconv, params.dwconv_bias)
    branch = ops.reshape(ops.permute(spatial, (0, 2, 3, 1)), (n, m, d))

    return ops.layer_norm(ops.add(z_prev, branch), params.ln_gamma, params.ln_beta)
