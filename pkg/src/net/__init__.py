"""SONO / SONO-MultiKAN blocks and the full segmentation model."""
from .blocks import (
    Conv2d,
    SonoBlock,
    SonoMultiKanBlock,
    bottleneck_forward,
    resample,
    sono_block_forward,
    sono_multikan_block_forward,
)
from .config import ModelConfig, tiny_config
from .model import ImplicitUKan, build_model, model_forward, predict_masks

__all__ = [
    "Conv2d",
    "ImplicitUKan",
    "ModelConfig",
    "SonoBlock",
    "SonoMultiKanBlock",
    "bottleneck_forward",
    "build_model",
    "model_forward",
    "predict_masks",
    "resample",
    "sono_block_forward",
    "sono_multikan_block_forward",
    "tiny_config",
]
