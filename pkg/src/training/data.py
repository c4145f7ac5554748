"""
Segmentation dataset ingestion.

Layout:
    root/images/<stem>.png|.bmp   8-bit grayscale or RGB
    root/masks/<stem>.png         foreground where value >= 128
    root/{train,val,test}.txt     optional split lists, one stem per line

Without val.txt a seeded fraction of the training items becomes the
validation split. An empty val.txt means validating on the training items.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from PIL import Image

from src.utils.errors import DataError
from src.utils.monitoring import get_logger

IMAGE_SUFFIXES = (".png", ".bmp")
SPLITS = ("train", "val", "test")

logger = get_logger("data")


@dataclass(frozen=True)
class DataItem:
    stem: str
    image_path: Path
    mask_path: Path


@dataclass
class SplitArrays:
    ids: List[str]
    images: np.ndarray  # [N, C, H, W] float32 in [0, 1]
    masks: np.ndarray   # [N, H, W] uint8 in {0, 1}

    def __len__(self) -> int:
        return len(self.ids)


def discover_items(root: Path) -> Dict[str, DataItem]:
    image_dir, mask_dir = root / "images", root / "masks"
    if not image_dir.is_dir():
        raise DataError("image directory not found", path=image_dir)
    if not mask_dir.is_dir():
        raise DataError("mask directory not found", path=mask_dir)
    items: Dict[str, DataItem] = {}
    for path in sorted(image_dir.iterdir()):
        if path.suffix.lower() not in IMAGE_SUFFIXES:
            continue
        mask = mask_dir / f"{path.stem}.png"
        if not mask.is_file():
            raise DataError(f"no mask for image {path.name}", path=mask)
        items[path.stem] = DataItem(path.stem, path, mask)
    if not items:
        raise DataError("no images found", path=image_dir)
    return items


def _read_split_file(path: Path) -> Optional[List[str]]:
    if not path.is_file():
        return None
    return [line.strip() for line in path.read_text().splitlines() if line.strip() and not line.startswith("#")]


@dataclass
class SegmentationDataset:
    root: Path
    size: Tuple[int, int] = (64, 64)
    channels: int = 3
    val_fraction: float = 0.1
    seed: int = 0
    items: Dict[str, DataItem] = field(init=False)
    splits: Dict[str, List[str]] = field(init=False)

    def __post_init__(self):
        self.root = Path(self.root)
        self.items = discover_items(self.root)
        self.splits = self._resolve_splits()
        logger.info(
            "dataset_loaded",
            root=str(self.root),
            **{f"n_{name}": len(stems) for name, stems in self.splits.items()},
        )

    def _resolve_splits(self) -> Dict[str, List[str]]:
        listed = {name: _read_split_file(self.root / f"{name}.txt") for name in SPLITS}
        for name, stems in listed.items():
            for stem in stems or []:
                if stem not in self.items:
                    raise DataError(f"{name} split names unknown item {stem!r}", path=self.root / f"{name}.txt")
        test = listed["test"] or []
        train = listed["train"]
        if train is None:
            train = [s for s in self.items if s not in set(test) | set(listed["val"] or [])]
        val = listed["val"]
        if val is None:
            order = np.random.default_rng(self.seed).permutation(len(train))
            n_val = int(round(self.val_fraction * len(train)))
            n_val = max(0, min(n_val, len(train) - 1))
            val_idx = set(int(i) for i in order[:n_val])
            val = [s for i, s in enumerate(train) if i in val_idx]
            train = [s for i, s in enumerate(train) if i not in val_idx]
        if not train:
            raise DataError("training split is empty", path=self.root)
        return {"train": list(train), "val": list(val), "test": list(test)}

    def with_splits(self, splits: Dict[str, List[str]]) -> "SegmentationDataset":
        """Replace the split assignment (e.g. with the stems stored in a checkpoint)."""
        for name, stems in splits.items():
            missing = [s for s in stems if s not in self.items]
            if missing:
                raise DataError(f"{name} split refers to missing items {missing[:3]}", path=self.root)
        self.splits = {name: list(splits.get(name, [])) for name in SPLITS}
        return self

    def load(self, split: str, threads: int = 1) -> SplitArrays:
        if split not in self.splits:
            raise DataError(f"unknown split {split!r}; expected one of {SPLITS}")
        stems = self.splits[split]
        if split == "val" and not stems:
            logger.warning("val_split_empty", fallback="train", root=str(self.root))
            stems = self.splits["train"]
        if not stems:
            raise DataError(f"split {split!r} is empty", path=self.root)
        return load_items([self.items[s] for s in stems], self.size, self.channels, threads)


def load_image(path: Path, size: Tuple[int, int], channels: int) -> np.ndarray:
    try:
        with Image.open(path) as img:
            img = img.convert("L" if channels == 1 else "RGB")
            img = img.resize((size[1], size[0]), Image.Resampling.BILINEAR)
            array = np.asarray(img, dtype=np.float32) / 255.0
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot read image ({exc})", path=path) from exc
    if array.ndim == 2:
        array = array[None]
    else:
        array = array.transpose(2, 0, 1)
    if array.shape[0] != channels:
        raise DataError(f"expected {channels} channels, got {array.shape[0]}", path=path)
    return np.ascontiguousarray(array)


def load_mask(path: Path, size: Tuple[int, int]) -> np.ndarray:
    try:
        with Image.open(path) as img:
            img = img.convert("L").resize((size[1], size[0]), Image.Resampling.NEAREST)
            array = np.asarray(img)
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot read mask ({exc})", path=path) from exc
    return (array >= 128).astype(np.uint8)


def load_items(
    items: Sequence[DataItem],
    size: Tuple[int, int],
    channels: int,
    threads: int = 1,
) -> SplitArrays:
    def _load(item: DataItem) -> Tuple[np.ndarray, np.ndarray]:
        return load_image(item.image_path, size, channels), load_mask(item.mask_path, size)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            pairs = list(pool.map(_load, items))
    else:
        pairs = [_load(item) for item in items]
    return SplitArrays(
        ids=[item.stem for item in items],
        images=np.stack([p[0] for p in pairs]),
        masks=np.stack([p[1] for p in pairs]),
    )
