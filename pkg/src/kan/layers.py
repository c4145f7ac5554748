"""
KAN and MultiKAN layers.

A KanLayer maps n_in inputs to n_out outputs; every edge (j, i) carries one
learnable univariate function

    phi_ji(x) = base_weight[j, i] * silu(x) + spline_weight[j, i] * sum_b coeffs[j, i, b] * B_b(x)

and each output node sums its incoming edges. A MultiKanLayer follows the
KanLayer with a parameter-free multiplication sub-layer: the first n_add
outputs pass through and every following group of mul_arity consecutive
outputs collapses into one product node.
"""
from typing import List, Optional, Sequence

import numpy as np

from src.tensor import Module, Parameter, Tensor, apply_op, ops
from src.utils.errors import ShapeError

from .basis import basis_values, bspline_basis
from .grid import BSplineGrid


def _silu(x: np.ndarray) -> np.ndarray:
    return x * 0.5 * (1.0 + np.tanh(0.5 * x))


class KanLayer(Module):
    def __init__(
        self,
        n_in: int,
        n_out: int,
        grid: Optional[BSplineGrid] = None,
        rng: Optional[np.random.Generator] = None,
        name: str = "kan",
    ):
        if n_in < 1 or n_out < 1:
            raise ShapeError(f"KanLayer needs positive widths, got {n_in} -> {n_out}")
        rng = rng if rng is not None else np.random.default_rng(0)
        self.n_in = n_in
        self.n_out = n_out
        self.grid = grid or BSplineGrid()
        scale = 0.1 / np.sqrt(n_in)
        bound = 1.0 / np.sqrt(n_in)
        self.spline_coeffs = Parameter(
            rng.uniform(-scale, scale, (n_out, n_in, self.grid.n_basis)), name=f"{name}.spline_coeffs"
        )
        self.base_weight = Parameter(rng.uniform(-bound, bound, (n_out, n_in)), name=f"{name}.base_weight")
        self.spline_weight = Parameter(np.ones((n_out, n_in)), name=f"{name}.spline_weight")

    def forward(self, x: Tensor) -> Tensor:
        return kan_layer_forward(x, self)


class MultiKanLayer(Module):
    def __init__(self, kan: KanLayer, n_add: int, n_mul: int, mul_arity: int = 2):
        if n_add < 0 or n_mul < 0 or mul_arity < 1:
            raise ShapeError(f"invalid node layout n_add={n_add}, n_mul={n_mul}, arity={mul_arity}")
        if kan.n_out != n_add + mul_arity * n_mul:
            raise ShapeError(
                f"KAN width {kan.n_out} does not equal n_add + mul_arity * n_mul = "
                f"{n_add} + {mul_arity} * {n_mul}"
            )
        self.kan = kan
        self.n_add = n_add
        self.n_mul = n_mul
        self.mul_arity = mul_arity

    @classmethod
    def build(
        cls,
        n_in: int,
        n_add: int,
        n_mul: int,
        mul_arity: int = 2,
        grid: Optional[BSplineGrid] = None,
        rng: Optional[np.random.Generator] = None,
        name: str = "multikan",
    ) -> "MultiKanLayer":
        kan = KanLayer(n_in, n_add + mul_arity * n_mul, grid=grid, rng=rng, name=f"{name}.kan")
        return cls(kan, n_add, n_mul, mul_arity)

    @property
    def n_in(self) -> int:
        return self.kan.n_in

    @property
    def out_width(self) -> int:
        return self.n_add + self.n_mul

    def forward(self, x: Tensor) -> Tensor:
        return multikan_layer_forward(x, self)


class MultiKan(Module):
    """A stack of MultiKanLayers applied left to right."""

    def __init__(self, layers: Sequence[MultiKanLayer]):
        self.layers = list(layers)
        _check_chain(self.layers)

    def forward(self, x: Tensor) -> Tensor:
        return multikan_forward(x, self.layers)


def kan_layer_forward(x: Tensor, layer: KanLayer) -> Tensor:
    if x.shape[-1] != layer.n_in:
        raise ShapeError(f"KAN layer expects trailing dim {layer.n_in}, got {x.shape}")
    lead = x.shape[:-1]
    nb = layer.grid.n_basis

    base = ops.linear(ops.silu(x), ops.permute(layer.base_weight, (1, 0)))

    weighted = ops.mul(
        layer.spline_coeffs, ops.reshape(layer.spline_weight, (layer.n_out, layer.n_in, 1))
    )
    flat_coeffs = ops.permute(ops.reshape(weighted, (layer.n_out, layer.n_in * nb)), (1, 0))
    basis = ops.reshape(bspline_basis(x, layer.grid), lead + (layer.n_in * nb,))
    spline = ops.linear(basis, flat_coeffs)
    return ops.add(base, spline)


def multiply_groups(y: Tensor, n_add: int, n_mul: int, arity: int) -> Tensor:
    """Pass the first n_add entries through; reduce the rest by products of
    `arity` consecutive entries."""
    lead = y.shape[:-1]
    head = y.data[..., :n_add]
    groups = y.data[..., n_add:n_add + n_mul * arity].reshape(lead + (n_mul, arity))
    out = np.concatenate([head, groups.prod(axis=-1)], axis=-1)

    def _backward(grads, saved, needs):
        (g,) = grads
        (yv,) = saved
        grp = yv[..., n_add:].reshape(lead + (n_mul, arity))
        g_grp = np.empty_like(grp)
        for a in range(arity):
            others = np.delete(grp, a, axis=-1).prod(axis=-1)
            g_grp[..., a] = g[..., n_add:] * others
        return (np.concatenate([g[..., :n_add], g_grp.reshape(lead + (n_mul * arity,))], axis=-1),)

    return apply_op("multiply_groups", (y,), out, (y.data,), _backward)


def multikan_layer_forward(x: Tensor, layer: MultiKanLayer) -> Tensor:
    y = kan_layer_forward(x, layer.kan)
    if layer.n_mul == 0:
        return y
    return multiply_groups(y, layer.n_add, layer.n_mul, layer.mul_arity)


def _check_chain(layers: Sequence[MultiKanLayer]) -> None:
    for i in range(1, len(layers)):
        if layers[i - 1].out_width != layers[i].n_in:
            raise ShapeError(
                f"MultiKAN width chain broken at layer {i}: "
                f"{layers[i - 1].out_width} outputs feed {layers[i].n_in} inputs"
            )


def multikan_forward(x: Tensor, layers: Sequence[MultiKanLayer]) -> Tensor:
    _check_chain(layers)
    for layer in layers:
        x = multikan_layer_forward(x, layer)
    return x


def edge_function(layer: KanLayer, j: int, i: int, xs: np.ndarray) -> np.ndarray:
    """Sample phi_ji on xs (no tape)."""
    xs = np.asarray(xs, dtype=np.float64)
    spline = basis_values(xs, layer.grid) @ layer.spline_coeffs.data[j, i].astype(np.float64)
    return (
        float(layer.base_weight.data[j, i]) * _silu(xs)
        + float(layer.spline_weight.data[j, i]) * spline
    )


def refine_grid(
    layer: KanLayer,
    grid_size: int,
    samples: Optional[int] = None,
    lo: Optional[float] = None,
    hi: Optional[float] = None,
) -> KanLayer:
    """
    New KanLayer on a grid of ``grid_size`` cells (optionally over a new
    range) whose spline parts are the least-squares projections of the old
    ones. Base weights and spline weights carry over unchanged.
    """
    new_grid = BSplineGrid(
        grid_size=grid_size,
        degree=layer.grid.degree,
        lo=layer.grid.lo if lo is None else lo,
        hi=layer.grid.hi if hi is None else hi,
    )
    n = samples or max(8 * new_grid.n_basis, 64)
    xs = np.linspace(new_grid.lo, new_grid.hi, n)
    old = basis_values(xs, layer.grid) @ layer.spline_coeffs.data.astype(np.float64).reshape(
        -1, layer.grid.n_basis
    ).T
    fitted, *_ = np.linalg.lstsq(basis_values(xs, new_grid), old, rcond=None)

    dtype = layer.spline_coeffs.dtype
    refined = KanLayer(layer.n_in, layer.n_out, grid=new_grid, name=layer.spline_coeffs.name.rsplit(".", 1)[0])
    refined.spline_coeffs.data = np.ascontiguousarray(
        fitted.T.reshape(layer.n_out, layer.n_in, new_grid.n_basis), dtype=dtype
    )
    refined.base_weight.data = layer.base_weight.data.copy()
    refined.spline_weight.data = layer.spline_weight.data.copy()
    return refined


def kan_stack(
    widths: List[int],
    grid: Optional[BSplineGrid] = None,
    rng: Optional[np.random.Generator] = None,
    n_mul: Optional[List[int]] = None,
    mul_arity: int = 2,
) -> MultiKan:
    """MultiKan with output widths widths[1:]; n_mul[l] product nodes in layer l."""
    n_mul = n_mul or [0] * (len(widths) - 1)
    layers = [
        MultiKanLayer.build(
            widths[l], widths[l + 1] - n_mul[l], n_mul[l], mul_arity, grid=grid, rng=rng, name=f"layers.{l}"
        )
        for l in range(len(widths) - 1)
    ]
    return MultiKan(layers)
