"""
Vector fields f(x, v, t) and initial-velocity maps g(x0).

Every dynamics object is a Module whose forward(x, v, t) returns the
acceleration, a Tensor shaped like v.
"""
from typing import Optional

import numpy as np

from src.tensor import Module, Parameter, Tensor, ops


def _conv_init(rng: np.random.Generator, c_out: int, c_in: int, k: int, gain: float = 1.0) -> np.ndarray:
    fan_in = c_in * k * k
    return rng.normal(0.0, gain / np.sqrt(fan_in), (c_out, c_in, k, k))


class DynamicsNet(Module):
    """conv3x3 -> group norm -> silu -> conv3x3 over [x, v, t] channels."""

    def __init__(
        self,
        channels: int,
        hidden: Optional[int] = None,
        use_x: bool = True,
        rng: Optional[np.random.Generator] = None,
        name: str = "f",
    ):
        rng = rng if rng is not None else np.random.default_rng(0)
        hidden = hidden or channels
        self.channels = channels
        self.use_x = use_x
        c_in = (2 if use_x else 1) * channels + 1
        self.conv1 = Parameter(_conv_init(rng, hidden, c_in, 3), name=f"{name}.conv1")
        self.conv1_bias = Parameter(np.zeros(hidden), name=f"{name}.conv1_bias")
        self.conv2 = Parameter(_conv_init(rng, channels, hidden, 3, gain=0.5), name=f"{name}.conv2")
        self.conv2_bias = Parameter(np.zeros(channels), name=f"{name}.conv2_bias")

    def forward(self, x: Tensor, v: Tensor, t: float) -> Tensor:
        time = ops.constant_like(v, t)
        h = ops.concat((x, v, time) if self.use_x else (v, time), axis=1)
        h = ops.conv2d(h, self.conv1, self.conv1_bias, padding=1)
        h = ops.silu(ops.group_norm(h, 1))
        return ops.conv2d(h, self.conv2, self.conv2_bias, padding=1)


class VelocityNet(Module):
    """Initial velocity g(x0): one same-size conv3x3."""

    def __init__(self, channels: int, rng: Optional[np.random.Generator] = None, name: str = "g"):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.channels = channels
        self.conv = Parameter(_conv_init(rng, channels, channels, 3, gain=0.5), name=f"{name}.conv")
        self.conv_bias = Parameter(np.zeros(channels), name=f"{name}.conv_bias")

    def forward(self, x: Tensor) -> Tensor:
        return ops.conv2d(x, self.conv, self.conv_bias, padding=1)


class ZeroDynamics(Module):
    def forward(self, x: Tensor, v: Tensor, t: float) -> Tensor:
        return ops.scale(v, 0.0)


class ConstantDynamics(Module):
    """v' = c."""

    def __init__(self, value: float):
        self.value = float(value)

    def forward(self, x: Tensor, v: Tensor, t: float) -> Tensor:
        return ops.add(ops.scale(v, 0.0), Tensor(np.full(v.shape, self.value), dtype=v.dtype))


class HarmonicDynamics(Module):
    """v' = -omega^2 x."""

    def __init__(self, omega: float = 1.0):
        self.omega = float(omega)

    def forward(self, x: Tensor, v: Tensor, t: float) -> Tensor:
        return ops.add(ops.scale(x, -self.omega ** 2), ops.scale(v, 0.0))


class ConstantVelocity(Module):
    """g(x0) = c everywhere."""

    def __init__(self, value: float):
        self.value = float(value)

    def forward(self, x: Tensor) -> Tensor:
        return ops.add(ops.scale(x, 0.0), Tensor(np.full(x.shape, self.value), dtype=x.dtype))
