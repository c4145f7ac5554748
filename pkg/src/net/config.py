"""Architecture hyperparameters for the segmentation network."""
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Tuple

from src.kan.grid import BSplineGrid
from src.odeint.state import IntegrationConfig
from src.utils.errors import ConfigError, ShapeError


@dataclass
class ModelConfig:
    in_channels: int = 3
    out_channels: int = 1
    encoder_channels: List[int] = field(default_factory=lambda: [16, 32, 64, 128, 256])
    n_sono_blocks: int = 2
    n_tok_blocks: int = 3
    # One patch size and one embedding width per tokenized encoder stage;
    # the bottleneck reuses the last of each, the decoder mirrors them.
    patch_sizes: List[int] = field(default_factory=lambda: [2, 2, 2])
    embed_dims: List[int] = field(default_factory=lambda: [64, 128, 128])
    # Product nodes per MultiKAN layer; None means embed_dim // 8.
    n_mul: Optional[int] = None
    mul_arity: int = 2
    kan_layers: int = 3
    dw_kernel: int = 3
    dynamics_hidden: Optional[int] = None
    integration: IntegrationConfig = field(default_factory=IntegrationConfig)
    grid: BSplineGrid = field(default_factory=BSplineGrid)

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        n = self.n_sono_blocks + self.n_tok_blocks
        if self.n_sono_blocks < 0 or self.n_tok_blocks < 0 or n < 1:
            raise ConfigError("model needs at least one encoder block")
        if len(self.encoder_channels) != n:
            raise ConfigError(
                f"encoder_channels has {len(self.encoder_channels)} entries, "
                f"expected n_sono_blocks + n_tok_blocks = {n}"
            )
        if any(c < 1 for c in self.encoder_channels) or self.in_channels < 1 or self.out_channels < 1:
            raise ConfigError("channel counts must be positive")
        if self.n_tok_blocks == 0:
            return
        if len(self.patch_sizes) != self.n_tok_blocks or len(self.embed_dims) != self.n_tok_blocks:
            raise ConfigError(
                f"patch_sizes and embed_dims need {self.n_tok_blocks} entries, "
                f"got {len(self.patch_sizes)} and {len(self.embed_dims)}"
            )
        for k, d in zip(self.patch_sizes, self.embed_dims):
            if k < 1 or d % (k * k):
                raise ConfigError(f"embed dim {d} must be a positive multiple of K^2 = {k * k}")
            n_mul = d // 8 if self.n_mul is None else self.n_mul
            if n_mul > d:
                raise ConfigError(f"n_mul={n_mul} exceeds embed dim {d}")
        if self.dw_kernel % 2 == 0:
            raise ConfigError(f"dw_kernel must be odd, got {self.dw_kernel}")

    @property
    def depth(self) -> int:
        return self.n_sono_blocks + self.n_tok_blocks

    def tokenized_stages(self) -> List[Tuple[str, int, int]]:
        """(block name, resolution level, patch size) for every tokenized block; level i runs at H/2^i."""
        ns, nt = self.n_sono_blocks, self.n_tok_blocks
        stages = [(f"encoder.{ns + j}", ns + j, self.patch_sizes[j]) for j in range(nt)]
        if nt:
            stages.append(("bottleneck", self.depth, self.patch_sizes[-1]))
        for step in range(self.depth):
            level = self.depth - 1 - step
            if level >= ns:
                # decoder blocks run at the resolution of the encoder output they fuse with
                stages.append((f"decoder.{step}", level + 1, self.patch_sizes[level - ns]))
        return stages

    def min_input_multiple(self) -> int:
        """Smallest m such that every H, W divisible by m is accepted."""
        return math.lcm(2 ** self.depth, *((2 ** level) * k for _, level, k in self.tokenized_stages()))

    def check_input_size(self, h: int, w: int) -> None:
        factor = 2 ** self.depth
        if h % factor or w % factor:
            raise ShapeError(f"input {h}x{w} is not divisible by 2^{self.depth} = {factor}")
        for name, level, k in self.tokenized_stages():
            sh, sw = h >> level, w >> level
            if sh % k or sw % k:
                raise ShapeError(
                    f"input {h}x{w}: {name} runs at {sh}x{sw}, which is not divisible by its patch size {k}; "
                    f"H and W must be multiples of {self.min_input_multiple()}"
                )

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ModelConfig":
        data = dict(data)
        data["integration"] = IntegrationConfig(**data.get("integration", {}))
        data["grid"] = BSplineGrid(**data.get("grid", {}))
        for key in ("encoder_channels", "patch_sizes", "embed_dims"):
            if key in data:
                data[key] = [int(v) for v in data[key]]
        return cls(**data)


def tiny_config(**overrides: Any) -> ModelConfig:
    """Three-level model for 16x16 inputs (gradient audits, fast tests)."""
    values: Dict[str, Any] = dict(
        in_channels=1,
        encoder_channels=[4, 6, 8],
        n_sono_blocks=1,
        n_tok_blocks=2,
        patch_sizes=[2, 2],
        embed_dims=[8, 8],
        n_mul=1,
        kan_layers=1,
        integration=IntegrationConfig(steps=2),
        grid=BSplineGrid(grid_size=3, degree=3),
    )
    values.update(overrides)
    return ModelConfig(**values)
