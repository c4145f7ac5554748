"""
Uniform B-spline grid.

The knot vector covers [lo, hi] with G cells of width h and is extended by
k knots on each side, giving G + 2k + 1 knots and G + k active basis
functions of degree k.
"""
from dataclasses import dataclass

import numpy as np

from src.utils.errors import GridError


@dataclass(frozen=True)
class BSplineGrid:
    grid_size: int = 5
    degree: int = 3
    lo: float = -1.0
    hi: float = 1.0

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if int(self.grid_size) != self.grid_size or self.grid_size < 1:
            raise GridError(f"grid_size must be an integer >= 1, got {self.grid_size}")
        if int(self.degree) != self.degree or self.degree < 0:
            raise GridError(f"degree must be an integer >= 0, got {self.degree}")
        if not self.hi > self.lo:
            raise GridError(f"grid range must satisfy lo < hi, got [{self.lo}, {self.hi}]")

    @property
    def h(self) -> float:
        return (self.hi - self.lo) / self.grid_size

    @property
    def n_basis(self) -> int:
        return self.grid_size + self.degree

    @property
    def knots(self) -> np.ndarray:
        k = self.degree
        return self.lo + (np.arange(self.grid_size + 2 * k + 1) - k) * self.h

    def with_size(self, grid_size: int) -> "BSplineGrid":
        return BSplineGrid(grid_size=grid_size, degree=self.degree, lo=self.lo, hi=self.hi)
