"""Additive Gaussian corruption used by the noise-robustness ablation."""
import numpy as np

from src.tensor import Tensor


def add_gaussian_noise(image, level: float, seed: int):
    """image + N(0, level^2) per element, clipped to [0, 1]. Same seed, same noise."""
    if level < 0:
        raise ValueError(f"noise level must be >= 0, got {level}")
    is_tensor = isinstance(image, Tensor)
    data = image.data if is_tensor else np.asarray(image)
    if level == 0:
        out = data.copy()
    else:
        rng = np.random.default_rng(seed)
        out = np.clip(data + rng.normal(0.0, level, data.shape), 0.0, 1.0).astype(data.dtype)
    return Tensor(out, dtype=out.dtype) if is_tensor else out
