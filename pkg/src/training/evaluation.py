"""Model evaluation over a loaded split."""
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Union

from src.metrics import MetricsReport, add_gaussian_noise, image_metrics
from src.net import ImplicitUKan, predict_masks
from src.tensor import Tensor

from .checkpoint import CheckpointMeta
from .data import SegmentationDataset, SplitArrays


def evaluate(
    model: ImplicitUKan,
    data: SplitArrays,
    threads: int = 1,
    noise_level: float = 0.0,
    noise_seed: int = 0,
) -> MetricsReport:
    """
    Per-image forward pass and metrics. Images are processed one at a time,
    so the result does not depend on ``threads``. Image i is corrupted with
    seed noise_seed + i when noise_level > 0.
    """
    dtype = model.parameters()[0].dtype

    def _one(i: int):
        image = data.images[i:i + 1].astype(dtype)
        if noise_level > 0:
            image = add_gaussian_noise(image, noise_level, noise_seed + i)
        pred = predict_masks(model, Tensor(image, dtype=dtype))[0]
        return image_metrics(data.ids[i], pred, data.masks[i])

    indices = range(len(data))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(_one, indices))
    else:
        rows = [_one(i) for i in indices]
    return MetricsReport(rows)


def checkpoint_split(
    root: Union[str, Path],
    meta: CheckpointMeta,
    split: str = "val",
    threads: int = 1,
) -> SplitArrays:
    """Load ``split`` of the dataset at root the way the checkpoint's run saw it."""
    dataset = SegmentationDataset(
        root,
        size=tuple(meta.image_size),
        channels=meta.model_cfg.in_channels,
        seed=meta.seed,
    )
    if meta.splits:
        dataset.with_splits(meta.splits)
    return dataset.load(split, threads=threads)
