"""
Constant-memory gradients for ODE blocks.

The forward solve is recorded on the tape as a single entry that keeps only
the initial and final states. Its backward integrates the augmented system

    x' = v                     v' = f(x, v, t)
    a_x' = -a_v df/dx          a_v' = -a_x - a_v df/dv
    g_theta' = -a_v df/dtheta

from t1 back to t0 with the same fixed-step RK4 scheme, reconstructing the
state trajectory on the fly. Each evaluation of the augmented field runs f
on a private tape and takes one vector-Jacobian product seeded with a_v.
"""
from typing import List, Sequence, Tuple

import numpy as np

from src.tensor import Module, Tape, Tensor, apply_op, grad_of, no_grad, vjp
from src.utils.errors import IntegrationError

from .rk4 import rk4_arrays, rk4_step
from .state import IntegrationConfig, OdeState


def _augmented_field(f: Module, params: Sequence[Tensor]):
    def field(y: List[np.ndarray], t: float) -> List[np.ndarray]:
        x, v, a_x, a_v = y[0], y[1], y[2], y[3]
        with Tape() as inner:
            xt = Tensor(x, requires_grad=True, dtype=x.dtype)
            vt = Tensor(v, requires_grad=True, dtype=v.dtype)
            acc = f(xt, vt, t)
        if acc.id in inner:
            grads = vjp(inner, [acc], [a_v])
        else:
            grads = {}
        fx = grad_of(grads, xt)
        fv = grad_of(grads, vt)
        return [v, acc.data, -fx, -a_x - fv] + [-grad_of(grads, p) for p in params]

    return field


def integrate_steps(state0: OdeState, cfg: IntegrationConfig, f: Module) -> OdeState:
    state = state0
    for i in range(cfg.steps):
        state = rk4_step(state, cfg.time_at(i), cfg.h, f, step=i)
    return OdeState(state.x, state.v, cfg=cfg)


def adjoint_backward(
    state0: OdeState,
    state1: OdeState,
    grad_out: OdeState,
    cfg: IntegrationConfig,
    f: Module,
) -> Tuple[OdeState, List[np.ndarray]]:
    """
    Loss gradients with respect to the initial state and to every parameter
    of ``f`` (in f.parameters() order), given the gradient at the final state.
    """
    if state1.cfg is not None and state1.cfg != cfg:
        raise IntegrationError(f"state was produced with {state1.cfg}, backward called with {cfg}")
    params = f.parameters()
    field = _augmented_field(f, params)
    y = [state1.x.data, state1.v.data, grad_out.x.data, grad_out.v.data]
    y += [np.zeros(p.shape, dtype=p.dtype) for p in params]

    with no_grad():
        for i in range(cfg.steps, 0, -1):
            y = rk4_arrays(y, cfg.time_at(i), -cfg.h, field)
            if not all(np.all(np.isfinite(a)) for a in y):
                raise IntegrationError("non-finite values in the adjoint sweep", step=i - 1)

    dtype = state0.x.dtype
    grad0 = OdeState(Tensor(y[2], dtype=dtype), Tensor(y[3], dtype=dtype))
    return grad0, [np.asarray(g) for g in y[4:]]


def ode_solve_adjoint(state0: OdeState, cfg: IntegrationConfig, f: Module) -> OdeState:
    """Solve and register one tape entry whose backward is adjoint_backward."""
    with no_grad():
        final = integrate_steps(state0, cfg, f)
    params = f.parameters()
    x0, v0 = state0.x.data, state0.v.data

    def _backward(grads, saved, needs):
        sx0, sv0, sx1, sv1 = saved
        dtype = sx0.dtype
        grad0, grad_params = adjoint_backward(
            OdeState(Tensor(sx0, dtype=dtype), Tensor(sv0, dtype=dtype)),
            OdeState(Tensor(sx1, dtype=dtype), Tensor(sv1, dtype=dtype), cfg=cfg),
            OdeState(Tensor(grads[0], dtype=dtype), Tensor(grads[1], dtype=dtype)),
            cfg,
            f,
        )
        return (grad0.x.data, grad0.v.data, *grad_params)

    x1, v1 = apply_op(
        "ode_solve_adjoint",
        (state0.x, state0.v, *params),
        (final.x.data, final.v.data),
        (x0, v0, final.x.data, final.v.data),
        _backward,
    )
    return OdeState(x1, v1, cfg=cfg)
