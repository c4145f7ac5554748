"""
Classical fourth-order Runge-Kutta steps for the first-order system

    x' = v,  v' = f(x, v, t)

obtained from the second-order block x'' = f(x, x', t).
"""
from typing import Callable, List, Sequence

import numpy as np

from src.tensor import Module, Tensor, apply_op, ops
from src.utils.errors import IntegrationError, NonFiniteError

from .state import OdeState


def rk4_combine(y: Tensor, k1: Tensor, k2: Tensor, k3: Tensor, k4: Tensor, h: float) -> Tensor:
    """y + h * (k1 + 2 k2 + 2 k3 + k4) / 6."""
    out = y.data + h * (k1.data + 2 * k2.data + 2 * k3.data + k4.data) / 6

    def _backward(grads, saved, needs):
        (g,) = grads
        return (g, g * (h / 6), g * (h / 3), g * (h / 3), g * (h / 6))

    return apply_op("rk4_combine", (y, k1, k2, k3, k4), out, (), _backward)


def rk4_step(state: OdeState, t: float, h: float, f: Module, step: int = None) -> OdeState:
    if not h > 0:
        raise IntegrationError(f"step size must be positive, got {h}", step=step)
    x, v = state.x, state.v
    half = 0.5 * h
    try:
        k1x, k1v = v, f(x, v, t)
        k2x = ops.add(v, ops.scale(k1v, half))
        k2v = f(ops.add(x, ops.scale(k1x, half)), k2x, t + half)
        k3x = ops.add(v, ops.scale(k2v, half))
        k3v = f(ops.add(x, ops.scale(k2x, half)), k3x, t + half)
        k4x = ops.add(v, ops.scale(k3v, h))
        k4v = f(ops.add(x, ops.scale(k3x, h)), k4x, t + h)
        x1 = rk4_combine(x, k1x, k2x, k3x, k4x, h)
        v1 = rk4_combine(v, k1v, k2v, k3v, k4v, h)
    except NonFiniteError as exc:
        raise IntegrationError(f"non-finite state during RK4: {exc}", step=step) from exc
    return OdeState(x1, v1)


ArrayField = Callable[[List[np.ndarray], float], List[np.ndarray]]


def rk4_arrays(y: Sequence[np.ndarray], t: float, h: float, field: ArrayField) -> List[np.ndarray]:
    """One RK4 step of a list-valued system y' = field(y, t); h may be negative."""
    half = 0.5 * h
    k1 = field(list(y), t)
    k2 = field([a + half * b for a, b in zip(y, k1)], t + half)
    k3 = field([a + half * b for a, b in zip(y, k2)], t + half)
    k4 = field([a + h * b for a, b in zip(y, k3)], t + h)
    return [
        a + h * (b1 + 2 * b2 + 2 * b3 + b4) / 6
        for a, b1, b2, b3, b4 in zip(y, k1, k2, k3, k4)
    ]
