"""95th-percentile symmetric Hausdorff distance between mask boundaries."""
import math

import numpy as np

from .masks import check_pair

# Upper bound on boundary point pairs held in memory at once.
MAX_PAIRS = 1 << 22


def boundary(mask: np.ndarray) -> np.ndarray:
    """Foreground pixels with a background 4-neighbour or lying on the image edge."""
    padded = np.pad(mask, 1, constant_values=False)
    interior = (
        padded[:-2, 1:-1] & padded[2:, 1:-1] & padded[1:-1, :-2] & padded[1:-1, 2:]
    )
    return mask & ~interior


def _directed_p95(src: np.ndarray, dst: np.ndarray) -> float:
    rows = max(1, MAX_PAIRS // len(dst))
    nearest = np.empty(len(src))
    for start in range(0, len(src), rows):
        part = src[start:start + rows]
        sq = ((part[:, None, :] - dst[None, :, :]) ** 2).sum(axis=-1)
        nearest[start:start + len(part)] = np.sqrt(sq.min(axis=1))
    return float(np.percentile(nearest, 95, method="linear"))


def hd95(pred, gt) -> float:
    """
    max(P95 of distances from P's boundary to G's, P95 of G's to P's), in
    pixels. Both empty: 0. Exactly one empty: the image diagonal.
    """
    p, g = check_pair(pred, gt)
    p_any, g_any = p.any(), g.any()
    if not p_any and not g_any:
        return 0.0
    if not p_any or not g_any:
        return math.hypot(*p.shape)
    bp = np.argwhere(boundary(p)).astype(np.float64)
    bg = np.argwhere(boundary(g)).astype(np.float64)
    return max(_directed_p95(bp, bg), _directed_p95(bg, bp))
