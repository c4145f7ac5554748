"""Dense tensors, reverse-mode tape and differentiable operators."""
from . import ops
from .module import Module
from .tape import Tape, TapeEntry, apply_op, backward, current_tape, grad_of, no_grad, vjp
from .tensor import (
    Parameter,
    Tensor,
    default_dtype,
    ones,
    precision,
    set_default_dtype,
    tensor,
    zeros,
)

__all__ = [
    "ops",
    "Module",
    "Parameter",
    "Tape",
    "TapeEntry",
    "Tensor",
    "apply_op",
    "backward",
    "current_tape",
    "default_dtype",
    "grad_of",
    "no_grad",
    "ones",
    "precision",
    "set_default_dtype",
    "tensor",
    "vjp",
    "zeros",
]
