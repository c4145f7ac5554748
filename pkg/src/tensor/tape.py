"""
Reverse-mode automatic differentiation tape.

Operations executed while a Tape is active (``with Tape() as tape:``) are
appended as TapeEntry records in execution order, which is a topological
order by construction. backward() replays the entries once each in reverse.

Every entry carries its saved-for-backward arrays explicitly in ``saved``;
backward functions receive them as an argument instead of closing over
them, so Tape.retained_buffers() is an honest count of what a forward pass
keeps alive.
"""
from contextlib import contextmanager
from contextvars import ContextVar
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.utils.errors import NonFiniteError, TapeError

from .tensor import Tensor

BackwardFn = Callable[[Tuple[np.ndarray, ...], Tuple, Tuple[bool, ...]], Sequence[Optional[np.ndarray]]]

_active: ContextVar[Optional["Tape"]] = ContextVar("active_tape", default=None)


@dataclass
class TapeEntry:
    op: str
    inputs: Tuple[int, ...]
    outputs: Tuple[int, ...]
    saved: Tuple
    backward: BackwardFn
    needs: Tuple[bool, ...]


@dataclass
class Tape:
    entries: List[TapeEntry] = field(default_factory=list)
    shapes: Dict[int, Tuple[tuple, np.dtype]] = field(default_factory=dict)
    produced: set = field(default_factory=set)
    _token: object = field(default=None, repr=False)

    def __enter__(self) -> "Tape":
        self._token = _active.set(self)
        return self

    def __exit__(self, *exc) -> None:
        _active.reset(self._token)
        self._token = None

    def record(self, entry: TapeEntry, inputs: Sequence[Tensor], outputs: Sequence[Tensor]) -> None:
        for t in inputs:
            self.shapes.setdefault(t.id, (t.shape, t.dtype))
        for t in outputs:
            self.shapes[t.id] = (t.shape, t.dtype)
            self.produced.add(t.id)
        self.entries.append(entry)

    def retained_buffers(self) -> int:
        """Number of arrays held for backward across all entries."""
        return sum(
            1 for entry in self.entries for item in entry.saved if isinstance(item, np.ndarray)
        )

    def __contains__(self, value_id: int) -> bool:
        return value_id in self.shapes


def current_tape() -> Optional[Tape]:
    return _active.get()


@contextmanager
def no_grad() -> Iterator[None]:
    token = _active.set(None)
    try:
        yield
    finally:
        _active.reset(token)


def check_finite(op: str, array: np.ndarray) -> None:
    if array.dtype.kind == "f" and not np.all(np.isfinite(array)):
        raise NonFiniteError(f"non-finite values produced by {op}")


def apply_op(
    op: str,
    inputs: Sequence[Tensor],
    outputs: Union[np.ndarray, Sequence[np.ndarray]],
    saved: Tuple,
    backward: BackwardFn,
) -> Union[Tensor, Tuple[Tensor, ...]]:
    """
    Wrap forward results as Tensors and record the op on the active tape.

    The op is recorded only when a tape is active and at least one input
    requires a gradient; otherwise ``saved`` is dropped immediately.
    """
    single = isinstance(outputs, np.ndarray)
    arrays = (outputs,) if single else tuple(outputs)
    finite_inputs = all(
        t.data.dtype.kind != "f" or np.all(np.isfinite(t.data)) for t in inputs
    )
    if finite_inputs:
        for array in arrays:
            check_finite(op, array)

    tape = _active.get()
    needs = tuple(t.requires_grad for t in inputs)
    track = tape is not None and any(needs)
    wrapped = tuple(Tensor(a, requires_grad=track, dtype=a.dtype) for a in arrays)
    if track:
        entry = TapeEntry(
            op=op,
            inputs=tuple(t.id for t in inputs),
            outputs=tuple(t.id for t in wrapped),
            saved=saved,
            backward=backward,
            needs=needs,
        )
        tape.record(entry, inputs, wrapped)
    return wrapped[0] if single else wrapped


def _as_id(value: Union[Tensor, int]) -> int:
    return value.id if isinstance(value, Tensor) else int(value)


def vjp(
    tape: Tape,
    outputs: Sequence[Union[Tensor, int]],
    seeds: Sequence[np.ndarray],
) -> Dict[int, np.ndarray]:
    """
    Vector-Jacobian product: propagate ``seeds`` from ``outputs`` back to
    every value on the tape. Values that receive no gradient are absent.
    """
    grads: Dict[int, np.ndarray] = {}
    for out, seed in zip(outputs, seeds):
        out_id = _as_id(out)
        if out_id not in tape.shapes:
            raise TapeError(f"value {out_id} is not on the tape")
        shape, dtype = tape.shapes[out_id]
        seed = np.asarray(seed, dtype=dtype)
        if seed.shape != shape:
            raise TapeError(f"seed shape {seed.shape} does not match value shape {shape}")
        grads[out_id] = grads[out_id] + seed if out_id in grads else seed.copy()

    with no_grad():
        for entry in reversed(tape.entries):
            if not any(o in grads for o in entry.outputs):
                continue
            out_grads = tuple(
                grads[o] if o in grads else np.zeros(*tape.shapes[o])
                for o in entry.outputs
            )
            in_grads = entry.backward(out_grads, entry.saved, entry.needs)
            for value_id, need, g in zip(entry.inputs, entry.needs, in_grads):
                if not need or g is None:
                    continue
                if value_id in grads:
                    grads[value_id] = grads[value_id] + g
                else:
                    grads[value_id] = np.array(g, copy=True)
    return grads


def backward(tape: Tape, loss: Union[Tensor, int]) -> Dict[int, np.ndarray]:
    """
    Gradient of a scalar loss with respect to every value on the tape.

    Leaves the loss does not depend on receive zero gradients.
    """
    loss_id = _as_id(loss)
    if loss_id not in tape.shapes:
        raise TapeError(f"value {loss_id} is not on the tape")
    shape, dtype = tape.shapes[loss_id]
    if int(np.prod(shape)) != 1:
        raise TapeError(f"loss must be scalar, got shape {shape}")

    grads = vjp(tape, [loss_id], [np.ones(shape, dtype=dtype)])
    for value_id, (shape, dtype) in tape.shapes.items():
        if value_id not in grads and value_id not in tape.produced:
            grads[value_id] = np.zeros(shape, dtype=dtype)
    return grads


def grad_of(grads: Dict[int, np.ndarray], t: Tensor) -> np.ndarray:
    """Gradient for ``t`` or zeros when it never reached the tape."""
    g = grads.get(t.id)
    return g if g is not None else np.zeros(t.shape, dtype=t.dtype)
