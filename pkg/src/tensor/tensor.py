"""
Dense tensors.

A Tensor wraps a row-major numpy array plus a process-unique value id that
the tape uses to key gradients. Arrays are treated as immutable once
wrapped; optimizers replace Parameter.data instead of writing into it.
"""
import itertools
from contextlib import contextmanager
from contextvars import ContextVar
from typing import Iterator, Optional, Sequence, Union

import numpy as np

_ids = itertools.count(1)
_default_dtype: ContextVar[np.dtype] = ContextVar("default_dtype", default=np.dtype(np.float32))

ArrayLike = Union[np.ndarray, float, int, Sequence]


def default_dtype() -> np.dtype:
    return _default_dtype.get()


def set_default_dtype(dtype) -> None:
    _default_dtype.set(np.dtype(dtype))


@contextmanager
def precision(dtype) -> Iterator[np.dtype]:
    """Switch the default scalar type, e.g. ``with precision("float64"):``."""
    token = _default_dtype.set(np.dtype(dtype))
    try:
        yield _default_dtype.get()
    finally:
        _default_dtype.reset(token)


class Tensor:
    __slots__ = ("data", "requires_grad", "id", "name")

    def __init__(
        self,
        data: ArrayLike,
        requires_grad: bool = False,
        dtype=None,
        name: Optional[str] = None,
    ):
        if isinstance(data, Tensor):
            data = data.data
        array = np.asarray(data, dtype=dtype or default_dtype())
        if array.ndim == 0:
            array = array.reshape(1)
        self.data = np.ascontiguousarray(array)
        self.requires_grad = requires_grad
        self.id = next(_ids)
        self.name = name

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def item(self) -> float:
        if self.data.size != 1:
            raise ValueError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def detach(self) -> "Tensor":
        return Tensor(self.data, dtype=self.data.dtype)

    # Arithmetic sugar. Imported lazily to keep ops -> tensor one-directional.
    def __add__(self, other):
        from . import ops
        return ops.add(self, _lift(other, self))

    __radd__ = __add__

    def __sub__(self, other):
        from . import ops
        return ops.sub(self, _lift(other, self))

    def __rsub__(self, other):
        from . import ops
        return ops.sub(_lift(other, self), self)

    def __mul__(self, other):
        from . import ops
        if isinstance(other, (int, float)):
            return ops.scale(self, float(other))
        return ops.mul(self, _lift(other, self))

    __rmul__ = __mul__

    def __truediv__(self, other):
        from . import ops
        if not isinstance(other, (int, float)):
            raise TypeError("only division by a Python scalar is supported")
        return ops.scale(self, 1.0 / float(other))

    def __neg__(self):
        from . import ops
        return ops.scale(self, -1.0)

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        label = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{flag}{label})"


class Parameter(Tensor):
    """Trainable leaf tensor."""

    __slots__ = ()

    def __init__(self, data: ArrayLike, name: Optional[str] = None, dtype=None):
        super().__init__(data, requires_grad=True, dtype=dtype, name=name)

    def assign(self, array: np.ndarray) -> None:
        if array.shape != self.data.shape:
            raise ValueError(
                f"cannot assign shape {array.shape} to parameter {self.name!r} of shape {self.data.shape}"
            )
        self.data = np.ascontiguousarray(array, dtype=self.data.dtype)


def _lift(value, like: Tensor) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(np.full(like.shape, value), dtype=like.dtype)


def tensor(data: ArrayLike, requires_grad: bool = False, dtype=None) -> Tensor:
    return Tensor(data, requires_grad=requires_grad, dtype=dtype)


def zeros(shape, dtype=None, requires_grad: bool = False) -> Tensor:
    return Tensor(np.zeros(shape, dtype=dtype or default_dtype()), requires_grad=requires_grad)


def ones(shape, dtype=None, requires_grad: bool = False) -> Tensor:
    return Tensor(np.ones(shape, dtype=dtype or default_dtype()), requires_grad=requires_grad)
