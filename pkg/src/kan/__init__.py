"""B-spline bases, KAN / MultiKAN layers and the tokenized MultiKAN block."""
from .basis import basis_derivatives, basis_values, bspline_basis
from .grid import BSplineGrid
from .layers import (
    KanLayer,
    MultiKan,
    MultiKanLayer,
    edge_function,
    kan_layer_forward,
    kan_stack,
    multikan_forward,
    multikan_layer_forward,
    multiply_groups,
    refine_grid,
)
from .tokenized import TokenizedBlock, detokenize, tok_block_forward, token_grid, tokenize

__all__ = [
    "BSplineGrid",
    "KanLayer",
    "MultiKan",
    "MultiKanLayer",
    "TokenizedBlock",
    "basis_derivatives",
    "basis_values",
    "bspline_basis",
    "detokenize",
    "edge_function",
    "kan_layer_forward",
    "kan_stack",
    "multikan_forward",
    "multikan_layer_forward",
    "multiply_groups",
    "refine_grid",
    "tok_block_forward",
    "token_grid",
    "tokenize",
]
