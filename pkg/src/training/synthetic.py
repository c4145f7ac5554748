"""Synthetic ellipse segmentation data for overfit runs and noise ablations."""
from pathlib import Path
from typing import Dict, List, Tuple, Union

import numpy as np
from PIL import Image

from src.utils.monitoring import get_logger

from .data import SplitArrays

logger = get_logger("synthetic")


def make_synthetic_sample(rng: np.random.Generator, size: Tuple[int, int]) -> Tuple[np.ndarray, np.ndarray]:
    """One 8-bit grayscale image with a bright ellipse and its {0,1} mask."""
    h, w = size
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    cy, cx = rng.uniform(0.3, 0.7) * h, rng.uniform(0.3, 0.7) * w
    a, b = rng.uniform(0.12, 0.28) * w, rng.uniform(0.12, 0.28) * h
    theta = rng.uniform(0.0, np.pi)
    dx, dy = xx - cx, yy - cy
    xr = dx * np.cos(theta) + dy * np.sin(theta)
    yr = -dx * np.sin(theta) + dy * np.cos(theta)
    mask = ((xr / a) ** 2 + (yr / b) ** 2 <= 1.0).astype(np.uint8)

    background = rng.uniform(0.15, 0.3) + rng.uniform(-0.05, 0.05) * (xx / w) + rng.uniform(-0.05, 0.05) * (yy / h)
    foreground = rng.uniform(0.4, 0.55)
    image = background + foreground * mask + rng.normal(0.0, 0.03, (h, w))
    image = np.round(np.clip(image, 0.0, 1.0) * 255).astype(np.uint8)
    return image, mask


def make_synthetic_items(
    n: int,
    size: Tuple[int, int] = (64, 64),
    seed: int = 0,
    channels: int = 1,
    prefix: str = "synth",
) -> SplitArrays:
    """In-memory samples, quantized exactly as they would load from disk."""
    rng = np.random.default_rng(seed)
    images, masks = [], []
    for _ in range(n):
        image, mask = make_synthetic_sample(rng, size)
        images.append(np.repeat((image.astype(np.float32) / 255.0)[None], channels, axis=0))
        masks.append(mask)
    return SplitArrays(
        ids=[f"{prefix}_{i:04d}" for i in range(n)],
        images=np.stack(images),
        masks=np.stack(masks),
    )


def write_synthetic_dataset(
    root: Union[str, Path],
    n_train: int = 8,
    n_val: int = 0,
    n_test: int = 0,
    size: Tuple[int, int] = (64, 64),
    seed: int = 0,
    validate_on_train: bool = False,
) -> Dict[str, List[str]]:
    """
    Write images/, masks/ and split files under root. With validate_on_train
    (and n_val == 0) val.txt repeats the training stems, which is what an
    overfit run measures.
    """
    root = Path(root)
    (root / "images").mkdir(parents=True, exist_ok=True)
    (root / "masks").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    counts = {"train": n_train, "val": n_val, "test": n_test}
    splits: Dict[str, List[str]] = {}
    index = 0
    for split, count in counts.items():
        stems = []
        for _ in range(count):
            image, mask = make_synthetic_sample(rng, size)
            stem = f"synth_{index:04d}"
            Image.fromarray(image).save(root / "images" / f"{stem}.png")
            Image.fromarray((mask * 255).astype(np.uint8)).save(root / "masks" / f"{stem}.png")
            stems.append(stem)
            index += 1
        splits[split] = stems
    if validate_on_train and not splits["val"]:
        splits["val"] = list(splits["train"])
    for split, stems in splits.items():
        (root / f"{split}.txt").write_text("".join(f"{s}\n" for s in stems))
    logger.info("synthetic_dataset_written", root=str(root), **{f"n_{k}": len(v) for k, v in splits.items()})
    return splits
