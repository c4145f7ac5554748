"""Phase-space state and integration settings for second-order ODE blocks."""
from dataclasses import dataclass
from typing import Optional

from src.tensor import Tensor
from src.utils.errors import ConfigError, ShapeError


@dataclass(frozen=True)
class IntegrationConfig:
    t0: float = 0.0
    t1: float = 1.0
    steps: int = 4
    method: str = "rk4"
    # False: differentiate through every solver step instead of the adjoint sweep.
    adjoint: bool = True
    # False: the vector field sees only (v, t).
    use_x: bool = True

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if int(self.steps) != self.steps or self.steps < 1:
            raise ConfigError(f"integration.steps must be an integer >= 1, got {self.steps}")
        if not self.t1 > self.t0:
            raise ConfigError(f"integration span must satisfy t0 < t1, got [{self.t0}, {self.t1}]")
        if self.method != "rk4":
            raise ConfigError(f"unsupported integration method {self.method!r}; only 'rk4' is available")

    @property
    def h(self) -> float:
        return (self.t1 - self.t0) / self.steps

    def time_at(self, i: int) -> float:
        return self.t0 + i * self.h


@dataclass
class OdeState:
    """Position x and velocity v, together a point of the doubled phase space."""

    x: Tensor
    v: Tensor
    # Settings of the solve that produced this state, if any.
    cfg: Optional[IntegrationConfig] = None

    def __post_init__(self):
        if self.x.shape != self.v.shape:
            raise ShapeError(f"position {self.x.shape} and velocity {self.v.shape} must share a shape")
