"""
Fitting small MultiKAN stacks to known targets at 64-bit precision.

Three stages: full-batch Adam on the tape as a warm start, Levenberg-Marquardt
on spline coefficients and base weights, and an exact least-squares solve of
the last layer given the hidden activations. Moving to a finer grid projects
every edge function onto it; inner layers get a grid stretched over the
observed hidden range.
"""
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from src.kan import (
    MultiKan,
    MultiKanLayer,
    basis_values,
    multikan_forward,
    multikan_layer_forward,
    refine_grid,
)
from src.tensor import Parameter, Tape, Tensor, backward, no_grad, ops
from src.training.optim import Adam
from src.utils.errors import ShapeError

HIDDEN_MARGIN = 0.05

Residual = Callable[[np.ndarray], np.ndarray]


def _silu(x: np.ndarray) -> np.ndarray:
    return x * 0.5 * (1.0 + np.tanh(0.5 * x))


@dataclass
class LmResult:
    iterations: int
    cost: float
    converged: bool


def predict(model: MultiKan, X: np.ndarray) -> np.ndarray:
    with no_grad():
        return multikan_forward(Tensor(X, dtype=np.float64), model.layers).data[:, 0]


def hidden_activations(model: MultiKan, X: np.ndarray, depth: int) -> np.ndarray:
    """Output of the first ``depth`` layers."""
    with no_grad():
        h = Tensor(X, dtype=np.float64)
        for layer in model.layers[:depth]:
            h = multikan_layer_forward(h, layer)
    return h.data


def fit_parameters(model: MultiKan, layers: Optional[Sequence[int]] = None) -> List[Parameter]:
    """Spline coefficients and base weights; spline weights stay at 1."""
    indices = range(len(model.layers)) if layers is None else layers
    params: List[Parameter] = []
    for i in indices:
        kan = model.layers[i].kan
        params += [kan.spline_coeffs, kan.base_weight]
    return params


def get_vector(params: Sequence[Parameter]) -> np.ndarray:
    return np.concatenate([p.data.reshape(-1) for p in params]).astype(np.float64)


def set_vector(params: Sequence[Parameter], theta: np.ndarray) -> None:
    offset = 0
    for p in params:
        p.assign(theta[offset:offset + p.size].reshape(p.shape))
        offset += p.size


def adam_warm_start(model: MultiKan, X: np.ndarray, y: np.ndarray, steps: int = 1000, lr: float = 1e-2) -> float:
    """Full-batch Adam on the mean squared error; returns the last loss."""
    opt = Adam(fit_parameters(model), lr=lr)
    xt = Tensor(X, dtype=np.float64)
    yt = Tensor(y[:, None], dtype=np.float64)
    loss_value = float("inf")
    for _ in range(steps):
        with Tape() as tape:
            diff = ops.sub(multikan_forward(xt, model.layers), yt)
            loss = ops.mean(ops.mul(diff, diff))
        opt.step(backward(tape, loss))
        loss_value = loss.item()
    return loss_value


def jacobian(residual: Residual, theta: np.ndarray, rel_step: float = 1e-6) -> np.ndarray:
    columns = []
    for j in range(theta.size):
        step = rel_step * (1.0 + abs(theta[j]))
        up, down = theta.copy(), theta.copy()
        up[j] += step
        down[j] -= step
        columns.append((residual(up) - residual(down)) / (2.0 * step))
    return np.stack(columns, axis=1)


def levenberg_marquardt(
    model: MultiKan,
    X: np.ndarray,
    y: np.ndarray,
    params: Sequence[Parameter],
    iterations: int,
    damping: float = 1e-3,
) -> LmResult:
    """
    Damped Gauss-Newton on the sum of squared residuals. A step is accepted
    only if it lowers the cost, so the cost never increases.
    """
    theta = get_vector(params)

    def residual(th: np.ndarray) -> np.ndarray:
        set_vector(params, th)
        return predict(model, X) - y

    r = residual(theta)
    cost = float(r @ r)
    lam = damping
    done, converged = 0, False
    for done in range(1, iterations + 1):
        J = jacobian(residual, theta)
        A = J.T @ J
        g = J.T @ r
        scale = np.maximum(np.diag(A), 1e-12)
        accepted, gain = False, 0.0
        while lam < 1e12:
            try:
                step = np.linalg.solve(A + lam * np.diag(scale), -g)
            except np.linalg.LinAlgError:
                lam *= 4.0
                continue
            r_new = residual(theta + step)
            c_new = float(r_new @ r_new)
            if np.isfinite(c_new) and c_new < cost:
                gain = (cost - c_new) / cost
                theta, r, cost = theta + step, r_new, c_new
                lam = max(lam / 3.0, 1e-12)
                accepted = True
                break
            lam *= 4.0
        if not accepted or gain < 1e-12:
            converged = True
            break
    set_vector(params, theta)
    return LmResult(iterations=done, cost=cost, converged=converged)


def solve_last_layer(model: MultiKan, X: np.ndarray, y: np.ndarray) -> None:
    """Exact least squares for the last (linear-in-parameters) layer."""
    last = model.layers[-1]
    kan = last.kan
    if last.n_mul or kan.n_out != 1:
        raise ShapeError("last-layer solve needs a single addition output")
    h = hidden_activations(model, X, len(model.layers) - 1)
    nb = kan.grid.n_basis
    design = np.concatenate(
        [np.column_stack([_silu(h[:, i]), basis_values(h[:, i], kan.grid)]) for i in range(kan.n_in)],
        axis=1,
    )
    sol, *_ = np.linalg.lstsq(design, y, rcond=None)
    sol = sol.reshape(kan.n_in, 1 + nb)
    kan.base_weight.assign(sol[None, :, 0])
    kan.spline_weight.assign(np.ones((1, kan.n_in)))
    kan.spline_coeffs.assign(sol[None, :, 1:])


def padded_range(h: np.ndarray, margin: float = HIDDEN_MARGIN) -> Tuple[float, float]:
    lo, hi = float(h.min()), float(h.max())
    span = hi - lo
    if span < 1e-3:
        centre = 0.5 * (lo + hi)
        return centre - 0.5, centre + 0.5
    return lo - margin * span, hi + margin * span


def regrid(model: MultiKan, grid_size: int, X: np.ndarray) -> MultiKan:
    """Project every layer onto ``grid_size`` cells; inner layers span the hidden range."""
    layers = []
    for depth, layer in enumerate(model.layers):
        if depth == 0:
            kan = refine_grid(layer.kan, grid_size)
        else:
            lo, hi = padded_range(hidden_activations(model, X, depth))
            kan = refine_grid(layer.kan, grid_size, lo=lo, hi=hi)
        layers.append(MultiKanLayer(kan, layer.n_add, layer.n_mul, layer.mul_arity))
    return MultiKan(layers)


def train_rmse(model: MultiKan, X: np.ndarray, y: np.ndarray) -> float:
    return float(np.sqrt(np.mean((predict(model, X) - y) ** 2)))
