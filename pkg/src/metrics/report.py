"""
Per-image and aggregate segmentation metrics.

Dice, HD95, accuracy and IoU aggregate as per-image means; F1 aggregates at
the dataset level from pooled pixel counts.
"""
from pathlib import Path
from typing import Iterable, List, Sequence, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel

from .hausdorff import hd95
from .overlap import accuracy, confusion_counts, dice, f1_pixels, iou

CSV_COLUMNS = ["id", "dice", "hd95", "acc", "iou", "f1"]


class ImageMetrics(BaseModel):
    id: str
    dice: float
    hd95: float
    acc: float
    iou: float
    f1: float
    tp: int
    fp: int
    fn: int


class MetricsAggregate(BaseModel):
    dice: float
    hd95: float
    acc: float
    iou: float
    f1: float
    n_images: int


def image_metrics(image_id: str, pred, gt) -> ImageMetrics:
    c = confusion_counts(pred, gt)
    return ImageMetrics(
        id=image_id,
        dice=dice(pred, gt),
        hd95=hd95(pred, gt),
        acc=accuracy(pred, gt),
        iou=iou(pred, gt),
        f1=f1_pixels(c.tp, c.fp, c.fn),
        tp=c.tp,
        fp=c.fp,
        fn=c.fn,
    )


class MetricsReport:
    def __init__(self, per_image: Iterable[ImageMetrics]):
        self.per_image: List[ImageMetrics] = list(per_image)
        if not self.per_image:
            raise ValueError("metrics report needs at least one image")

    @classmethod
    def from_masks(cls, ids: Sequence[str], preds: Sequence, gts: Sequence) -> "MetricsReport":
        return cls(image_metrics(i, p, g) for i, p, g in zip(ids, preds, gts))

    @property
    def aggregate(self) -> MetricsAggregate:
        rows = self.per_image
        tp = sum(r.tp for r in rows)
        fp = sum(r.fp for r in rows)
        fn = sum(r.fn for r in rows)
        return MetricsAggregate(
            dice=float(np.mean([r.dice for r in rows])),
            hd95=float(np.mean([r.hd95 for r in rows])),
            acc=float(np.mean([r.acc for r in rows])),
            iou=float(np.mean([r.iou for r in rows])),
            f1=f1_pixels(tp, fp, fn),
            n_images=len(rows),
        )

    # Convenience accessors mirroring the aggregate record.
    @property
    def dice(self) -> float:
        return self.aggregate.dice

    @property
    def hd95(self) -> float:
        return self.aggregate.hd95

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([r.model_dump() for r in self.per_image], columns=CSV_COLUMNS)

    def to_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False)
        return path

    def to_json(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.aggregate.model_dump_json(indent=2) + "\n")
        return path
