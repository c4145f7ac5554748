"""Binary cross-entropy on logits."""
import numpy as np

from src.tensor import Tensor, apply_op
from src.utils.errors import DataError, ShapeError


def bce_loss(logits: Tensor, target) -> Tensor:
    """
    mean(max(z, 0) - z * y + log(1 + exp(-|z|))), the logit form of
    -[y log sigmoid(z) + (1 - y) log(1 - sigmoid(z))].
    """
    y = target.data if isinstance(target, Tensor) else np.asarray(target)
    if y.shape != logits.shape:
        if y.size == logits.size and y.ndim == logits.ndim - 1:
            y = y.reshape(logits.shape)
        else:
            raise ShapeError(f"target shape {y.shape} does not match logits {logits.shape}")
    if not np.isin(y, (0, 1)).all():
        raise DataError("target mask is not binary")
    z = logits.data
    y = y.astype(z.dtype)
    per_pixel = np.maximum(z, 0) - z * y + np.log1p(np.exp(-np.abs(z)))
    loss = np.array([per_pixel.mean()], dtype=z.dtype)

    def _backward(grads, saved, needs):
        zv, yv = saved
        s = 0.5 * (1.0 + np.tanh(0.5 * zv))
        return ((s - yv) * (grads[0][0] / zv.size),)

    return apply_op("bce_loss", (logits,), loss, (z, y), _backward)
