"""
Overlap metrics on binary masks.

Dice and IoU use the smoothing constant EPS only when both masks are empty
(the score is then 1.0); otherwise the plain ratio is returned.
"""
from typing import NamedTuple

import numpy as np

from .masks import check_pair

EPS = 1e-6


class Confusion(NamedTuple):
    tp: int
    fp: int
    fn: int
    tn: int


def confusion_counts(pred, gt) -> Confusion:
    p, g = check_pair(pred, gt)
    tp = int(np.count_nonzero(p & g))
    fp = int(np.count_nonzero(p & ~g))
    fn = int(np.count_nonzero(~p & g))
    return Confusion(tp, fp, fn, int(p.size) - tp - fp - fn)


def _ratio(num: float, den: float) -> float:
    if den == 0:
        return (num + EPS) / (den + EPS)
    return num / den


def dice(pred, gt) -> float:
    c = confusion_counts(pred, gt)
    return _ratio(2.0 * c.tp, 2.0 * c.tp + c.fp + c.fn)


def iou(pred, gt) -> float:
    c = confusion_counts(pred, gt)
    return _ratio(float(c.tp), float(c.tp + c.fp + c.fn))


def accuracy(pred, gt) -> float:
    c = confusion_counts(pred, gt)
    return (c.tp + c.tn) / (c.tp + c.fp + c.fn + c.tn)


def f1_pixels(tp: int, fp: int, fn: int) -> float:
    """2tp / (2tp + fp + fn); 1.0 when there is nothing to find and nothing found."""
    den = 2 * tp + fp + fn
    return 1.0 if den == 0 else 2.0 * tp / den
