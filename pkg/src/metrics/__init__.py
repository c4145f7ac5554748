"""Segmentation metrics (Dice, IoU, accuracy, F1, HD95) and noise corruption."""
from .hausdorff import boundary, hd95
from .masks import BinaryMask
from .noise import add_gaussian_noise
from .overlap import EPS, Confusion, accuracy, confusion_counts, dice, f1_pixels, iou
from .report import CSV_COLUMNS, ImageMetrics, MetricsAggregate, MetricsReport, image_metrics

__all__ = [
    "BinaryMask",
    "CSV_COLUMNS",
    "Confusion",
    "EPS",
    "ImageMetrics",
    "MetricsAggregate",
    "MetricsReport",
    "accuracy",
    "add_gaussian_noise",
    "boundary",
    "confusion_counts",
    "dice",
    "f1_pixels",
    "hd95",
    "image_metrics",
    "iou",
]
