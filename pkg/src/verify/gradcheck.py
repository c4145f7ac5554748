"""
Central finite-difference gradient audits.

relative error = |analytic - numeric| / max(|analytic|, |numeric|, floor)
"""
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.kan import BSplineGrid, MultiKanLayer, TokenizedBlock, tok_block_forward, tokenize
from src.net import build_model, tiny_config
from src.odeint import DynamicsNet, IntegrationConfig, VelocityNet, sono_integrate
from src.tensor import Tape, Tensor, backward, grad_of, no_grad, ops, precision
from src.training.loss import bce_loss


@dataclass
class GradcheckResult:
    max_rel_error: float
    n_checked: int
    worst: Tuple[str, int]


def relative_error(analytic: float, numeric: float, floor: float = 1e-8) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def _coordinates(
    tensors: Sequence[Tensor],
    n_samples: Optional[int],
    rng: np.random.Generator,
) -> List[Tuple[int, int]]:
    coords = [(ti, j) for ti, t in enumerate(tensors) for j in range(t.size)]
    if n_samples is None or n_samples >= len(coords):
        return coords
    picks = rng.choice(len(coords), size=n_samples, replace=False)
    return [coords[int(i)] for i in sorted(picks)]


def gradcheck(
    fn: Callable[[], Tensor],
    tensors: Sequence[Tensor],
    eps: float = 1e-6,
    n_samples: Optional[int] = None,
    seed: int = 0,
    floor: float = 1e-8,
) -> GradcheckResult:
    """
    Compare tape gradients of the scalar ``fn()`` with central differences
    for every (or ``n_samples`` random) scalar entries of ``tensors``.
    ``fn`` must read the tensors' current ``data`` on each call.
    """
    with Tape() as tape:
        loss = fn()
    grads = backward(tape, loss)
    analytic = [grad_of(grads, t).reshape(-1) for t in tensors]

    worst, worst_err = ("", -1), 0.0
    coords = _coordinates(tensors, n_samples, np.random.default_rng(seed))
    for ti, j in coords:
        t = tensors[ti]
        original = t.data
        values = []
        for sign in (1.0, -1.0):
            bumped = original.copy().reshape(-1)
            bumped[j] += sign * eps
            t.data = bumped.reshape(original.shape)
            with no_grad():
                values.append(fn().item())
        t.data = original
        numeric = (values[0] - values[1]) / (2 * eps)
        err = relative_error(float(analytic[ti][j]), numeric, floor)
        if err > worst_err:
            worst_err, worst = err, (t.name or f"input{ti}", j)
    return GradcheckResult(max_rel_error=worst_err, n_checked=len(coords), worst=worst)


# ---------------------------------------------------------------------------
# Module audits used by the `gradcheck` command
# ---------------------------------------------------------------------------

def _rand(rng: np.random.Generator, *shape: int, name: str = None) -> Tensor:
    return Tensor(rng.normal(size=shape), requires_grad=True, name=name)


def _weighted_sum(y: Tensor, w: np.ndarray) -> Tensor:
    return ops.sum(ops.mul(y, Tensor(w, dtype=y.dtype)))


def audit_ops(seed: int = 0) -> Dict[str, GradcheckResult]:
    rng = np.random.default_rng(seed)
    results: Dict[str, GradcheckResult] = {}
    with precision("float64"):
        x = _rand(rng, 1, 2, 5, 5, name="x")
        k = _rand(rng, 3, 2, 3, 3, name="kernel")
        b = _rand(rng, 3, name="bias")
        w = rng.normal(size=(1, 3, 3, 3))
        results["conv2d"] = gradcheck(lambda: _weighted_sum(ops.conv2d(x, k, b, stride=2, padding=1), w), [x, k, b])

        dk = _rand(rng, 2, 1, 3, 3, name="dw_kernel")
        w2 = rng.normal(size=(1, 2, 5, 5))
        results["depthwise_conv2d"] = gradcheck(lambda: _weighted_sum(ops.depthwise_conv2d(x, dk), w2), [x, dk])

        a = _rand(rng, 4, 3, name="a")
        wt = _rand(rng, 3, 2, name="weight")
        bb = _rand(rng, 2, name="bias")
        w3 = rng.normal(size=(4, 2))
        results["linear"] = gradcheck(lambda: _weighted_sum(ops.linear(a, wt, bb), w3), [a, wt, bb])

        g = _rand(rng, 3, name="gamma")
        be = _rand(rng, 3, name="beta")
        w4 = rng.normal(size=(4, 3))
        results["layer_norm"] = gradcheck(lambda: _weighted_sum(ops.layer_norm(a, g, be), w4), [a, g, be])

        w5 = rng.normal(size=(1, 2, 10, 10))
        results["upsample2x"] = gradcheck(lambda: _weighted_sum(ops.upsample2x(x), w5), [x])

        for kind in ("silu", "sigmoid"):
            results[kind] = gradcheck(lambda kind=kind: _weighted_sum(ops.elementwise(a, kind), w3[:, :1] + w4), [a])
        c = _rand(rng, 4, 3, name="other")
        results["mul"] = gradcheck(lambda: _weighted_sum(ops.elementwise(a, "mul", c), w4), [a, c])
    return results


def audit_kan(seed: int = 0) -> Dict[str, GradcheckResult]:
    rng = np.random.default_rng(seed)
    results: Dict[str, GradcheckResult] = {}
    with precision("float64"):
        grid = BSplineGrid(grid_size=4, degree=3)
        layer = MultiKanLayer.build(3, 2, 1, grid=grid, rng=rng)
        x = Tensor(rng.uniform(-0.9, 0.9, (5, 3)), requires_grad=True, name="x")
        w = rng.normal(size=(5, 3))
        results["multikan_layer"] = gradcheck(lambda: _weighted_sum(layer(x), w), [x] + layer.parameters())

        block = TokenizedBlock(2, 8, patch_size=2, n_layers=1, n_mul=1, grid=grid, rng=rng)
        img = Tensor(rng.uniform(-0.5, 0.5, (1, 2, 4, 4)), requires_grad=True, name="image")
        w2 = rng.normal(size=(1, 4, 8))
        results["tokenized_block"] = gradcheck(
            lambda: _weighted_sum(tok_block_forward(tokenize(img, block), block), w2),
            [img] + block.parameters(),
            n_samples=60,
            seed=seed,
        )
    return results


def audit_odeint(seed: int = 0) -> Dict[str, GradcheckResult]:
    rng = np.random.default_rng(seed)
    with precision("float64"):
        cfg = IntegrationConfig(steps=3, adjoint=False)
        f = DynamicsNet(2, hidden=3, rng=rng)
        g = VelocityNet(2, rng=rng)
        x0 = _rand(rng, 1, 2, 4, 4, name="x0")
        w = rng.normal(size=(1, 2, 4, 4))
        result = gradcheck(
            lambda: _weighted_sum(sono_integrate(x0, g, f, cfg), w),
            [x0] + f.parameters() + g.parameters(),
            n_samples=60,
            seed=seed,
        )
    return {"sono_integrate_direct": result}


def audit_model(seed: int = 0, n_samples: int = 20) -> Dict[str, GradcheckResult]:
    """Tiny model on a 1x1x16x16 input, differentiated through every solver step."""
    rng = np.random.default_rng(seed)
    with precision("float64"):
        model = build_model(tiny_config(integration=IntegrationConfig(steps=2, adjoint=False)), seed=seed)
        image = Tensor(rng.uniform(0.0, 1.0, (1, 1, 16, 16)))
        target = (rng.uniform(size=(1, 1, 16, 16)) > 0.5).astype(np.float64)
        result = gradcheck(
            lambda: bce_loss(model(image), target),
            model.parameters(),
            n_samples=n_samples,
            seed=seed,
            floor=1e-6,
        )
    return {"model": result}


AUDITS = {
    "ops": audit_ops,
    "kan": audit_kan,
    "odeint": audit_odeint,
    "model": audit_model,
}
TOLERANCES = {"ops": 1e-5, "kan": 1e-5, "odeint": 1e-5, "model": 1e-3}
