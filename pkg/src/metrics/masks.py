"""Binary mask validation."""
from dataclasses import dataclass

import numpy as np

from src.utils.errors import ShapeError


@dataclass(frozen=True)
class BinaryMask:
    values: np.ndarray

    def __post_init__(self):
        if self.values.ndim != 2:
            raise ShapeError(f"mask must be 2-D [H, W], got shape {self.values.shape}")
        if not np.isin(self.values, (0, 1)).all():
            raise ValueError("mask values must be 0 or 1")

    @property
    def shape(self) -> tuple:
        return self.values.shape

    @classmethod
    def from_array(cls, array, threshold: float = None) -> "BinaryMask":
        """Wrap a {0,1} array, or binarize with ``values >= threshold``."""
        array = np.asarray(array)
        if threshold is not None:
            array = array >= threshold
        return cls(np.ascontiguousarray(array, dtype=np.uint8))


def as_bool(mask) -> np.ndarray:
    if isinstance(mask, BinaryMask):
        return mask.values.astype(bool)
    array = np.asarray(mask)
    if array.dtype != bool and not np.isin(array, (0, 1)).all():
        raise ValueError("mask values must be 0 or 1")
    return array.astype(bool)


def check_pair(pred, gt):
    p, g = as_bool(pred), as_bool(gt)
    if p.shape != g.shape:
        raise ShapeError(f"mask shapes differ: {p.shape} vs {g.shape}")
    return p, g
