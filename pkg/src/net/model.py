"""
Implicit U-KAN 2.0 segmentation network.

Encoder: n_sono SONO blocks then n_tok SONO-MultiKAN blocks, each halving
the resolution. A SONO-MultiKAN bottleneck works at the deepest
resolution. The decoder mirrors the encoder (n_tok SONO-MultiKAN up blocks,
then n_sono SONO up blocks); before each up block the encoder feature of the
same resolution is concatenated and fused by a 1x1 conv. A final 1x1 conv
produces logits.
"""
from collections import OrderedDict
from typing import Dict, List, Optional

import numpy as np

from src.tensor import Module, Parameter, Tensor, no_grad, ops
from src.utils.errors import ShapeError

from .blocks import (
    Conv2d,
    SonoBlock,
    SonoMultiKanBlock,
    bottleneck_forward,
    sono_block_forward,
    sono_multikan_block_forward,
)
from .config import ModelConfig


class ImplicitUKan(Module):
    def __init__(self, cfg: ModelConfig, rng: Optional[np.random.Generator] = None):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.cfg = cfg
        chans = cfg.encoder_channels
        ns, nt = cfg.n_sono_blocks, cfg.n_tok_blocks

        def tok_block(c_in: int, c_out: int, stage: int, direction: str, name: str) -> SonoMultiKanBlock:
            return SonoMultiKanBlock(
                c_in,
                c_out,
                cfg.embed_dims[stage],
                patch_size=cfg.patch_sizes[stage],
                direction=direction,
                integration=cfg.integration,
                grid=cfg.grid,
                n_mul=cfg.n_mul,
                mul_arity=cfg.mul_arity,
                kan_layers=cfg.kan_layers,
                dw_kernel=cfg.dw_kernel,
                hidden=cfg.dynamics_hidden,
                rng=rng,
                name=name,
            )

        encoder: List[Module] = []
        c_prev = cfg.in_channels
        for i in range(cfg.depth):
            name = f"encoder.{i}"
            if i < ns:
                encoder.append(
                    SonoBlock(c_prev, chans[i], "down", cfg.integration, cfg.dynamics_hidden, rng=rng, name=name)
                )
            else:
                encoder.append(tok_block(c_prev, chans[i], i - ns, "down", name))
            c_prev = chans[i]
        self.encoder = encoder

        if nt:
            self.bottleneck = tok_block(chans[-1], chans[-1], nt - 1, "none", "bottleneck")
        else:
            self.bottleneck = SonoBlock(
                chans[-1], chans[-1], "none", cfg.integration, cfg.dynamics_hidden, rng=rng, name="bottleneck"
            )

        fusions: List[Conv2d] = []
        decoder: List[Module] = []
        for level in reversed(range(cfg.depth)):
            c_skip = chans[level]
            c_out = chans[level - 1] if level > 0 else chans[0]
            fusions.append(Conv2d(c_prev + c_skip, c_skip, 1, rng=rng, name=f"fusions.{len(fusions)}"))
            name = f"decoder.{len(decoder)}"
            if level >= ns:
                decoder.append(tok_block(c_skip, c_out, level - ns, "up", name))
            else:
                decoder.append(
                    SonoBlock(c_skip, c_out, "up", cfg.integration, cfg.dynamics_hidden, rng=rng, name=name)
                )
            c_prev = c_out
        self.fusions = fusions
        self.decoder = decoder
        self.head = Conv2d(chans[0], cfg.out_channels, 1, rng=rng, name="head")

    def forward(self, image: Tensor, ablate_skip: Optional[int] = None) -> Tensor:
        return model_forward(image, self, ablate_skip=ablate_skip)

    def parameter_groups(self) -> Dict[str, List[Parameter]]:
        """Parameters keyed by top-level block (e.g. encoder.0, bottleneck, head)."""
        groups: Dict[str, List[Parameter]] = OrderedDict()
        for name, p in self.named_parameters():
            parts = name.split(".")
            key = ".".join(parts[:2]) if parts[0] in ("encoder", "decoder", "fusions") else parts[0]
            groups.setdefault(key, []).append(p)
        return groups


def _forward_block(x: Tensor, block: Module) -> Tensor:
    if isinstance(block, SonoMultiKanBlock):
        return sono_multikan_block_forward(x, block)
    return sono_block_forward(x, block)


def model_forward(image: Tensor, model: ImplicitUKan, ablate_skip: Optional[int] = None) -> Tensor:
    """Logits [N, out_channels, H, W]; ablate_skip zeroes that encoder level's skip."""
    cfg = model.cfg
    if image.ndim != 4 or image.shape[1] != cfg.in_channels:
        raise ShapeError(f"model expects [N, {cfg.in_channels}, H, W], got {image.shape}")
    cfg.check_input_size(image.shape[2], image.shape[3])

    skips: List[Tensor] = []
    x = image
    for block in model.encoder:
        x = _forward_block(x, block)
        skips.append(x)

    if isinstance(model.bottleneck, SonoMultiKanBlock):
        x = bottleneck_forward(x, model.bottleneck)
    else:
        x = sono_block_forward(x, model.bottleneck)

    for step, (fusion, block) in enumerate(zip(model.fusions, model.decoder)):
        level = cfg.depth - 1 - step
        skip = skips[level]
        if ablate_skip == level:
            skip = Tensor(np.zeros(skip.shape), dtype=skip.dtype)
        x = fusion(ops.concat_channels(x, skip))
        x = _forward_block(x, block)

    return model.head(x)


def build_model(cfg: ModelConfig, seed: int = 0) -> ImplicitUKan:
    return ImplicitUKan(cfg, rng=np.random.default_rng(seed))


def predict_masks(model: ImplicitUKan, images: Tensor) -> np.ndarray:
    """Binary masks [N, H, W] (uint8) where sigmoid(logit) > 0.5."""
    with no_grad():
        logits = model_forward(images, model)
    return (logits.data[:, 0] > 0).astype(np.uint8)
