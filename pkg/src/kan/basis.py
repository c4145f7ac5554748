"""
B-spline basis evaluation (Cox-de Boor recursion on a uniform grid).

Inputs are clamped to [lo, hi]; the gradient with respect to x is zero
outside that range.
"""
import numpy as np

from src.tensor import Tensor, apply_op

from .grid import BSplineGrid


def _cell_index(u: np.ndarray, grid: BSplineGrid) -> np.ndarray:
    # x == hi belongs to the last in-range cell so the basis stays a partition of unity.
    k = grid.degree
    idx = np.floor((u - grid.lo) / grid.h).astype(np.int64) + k
    return np.clip(idx, k, k + grid.grid_size - 1)


def cox_de_boor(u: np.ndarray, grid: BSplineGrid, degree: int) -> np.ndarray:
    """Basis functions of the given degree on grid knots, shape [..., G + 2k - degree]."""
    t = grid.knots
    n0 = grid.grid_size + 2 * grid.degree
    idx = _cell_index(u, grid)
    b = (np.arange(n0) == idx[..., None]).astype(np.float64)
    x = u[..., None]
    for p in range(1, degree + 1):
        n = n0 - p
        left = (x - t[:n]) / (t[p:p + n] - t[:n])
        right = (t[p + 1:p + 1 + n] - x) / (t[p + 1:p + 1 + n] - t[1:n + 1])
        b = left * b[..., :n] + right * b[..., 1:n + 1]
    return b


def basis_values(x: np.ndarray, grid: BSplineGrid) -> np.ndarray:
    """Values of the G + k degree-k bases at clamp(x), computed at 64-bit."""
    u = np.clip(np.asarray(x, dtype=np.float64), grid.lo, grid.hi)
    return cox_de_boor(u, grid, grid.degree)


def basis_derivatives(x: np.ndarray, grid: BSplineGrid) -> np.ndarray:
    """d/dx of every basis at clamp(x); zero where x lies outside [lo, hi]."""
    k = grid.degree
    x64 = np.asarray(x, dtype=np.float64)
    if k == 0:
        return np.zeros(x64.shape + (grid.n_basis,))
    u = np.clip(x64, grid.lo, grid.hi)
    lower = cox_de_boor(u, grid, k - 1)
    d = (lower[..., :-1] - lower[..., 1:]) / grid.h
    inside = (x64 >= grid.lo) & (x64 <= grid.hi)
    return d * inside[..., None]


def bspline_basis(x: Tensor, grid: BSplineGrid) -> Tensor:
    """Differentiable basis evaluation, output shape x.shape + (G + k,)."""
    values = basis_values(x.data, grid).astype(x.dtype)

    def _backward(grads, saved, needs):
        (g,) = grads
        (xv,) = saved
        d = basis_derivatives(xv, grid)
        return (np.sum(g * d, axis=-1).astype(g.dtype),)

    return apply_op("bspline_basis", (x,), values, (x.data,), _backward)
