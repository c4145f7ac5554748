"""MultiKAN stacks without product nodes must reproduce plain KAN stacks exactly."""
from typing import Any, Dict, List

import numpy as np

from src.kan import BSplineGrid, kan_layer_forward, kan_stack, multikan_forward
from src.tensor import Tape, Tensor, backward, grad_of, ops

from .check_base import CheckBase, CheckResult


def _random_case(seed: int) -> Dict[str, Any]:
    rng = np.random.default_rng(seed)
    depth = int(rng.integers(1, 4))
    widths = [int(w) for w in rng.integers(1, 6, size=depth + 1)]
    grid = BSplineGrid(grid_size=int(rng.integers(3, 8)), degree=int(rng.integers(1, 4)))
    return {"widths": widths, "grid": grid, "rng": rng}


def degeneracy_case(seed: int) -> Dict[str, Any]:
    case = _random_case(seed)
    rng = case["rng"]
    stack = kan_stack(case["widths"], grid=case["grid"], rng=rng)
    x = Tensor(rng.uniform(-1.2, 1.2, (7, case["widths"][0])), requires_grad=True, name="x")
    weights = Tensor(rng.normal(size=(7, case["widths"][-1])))

    with Tape() as tape_multi:
        y_multi = multikan_forward(x, stack.layers)
        loss_multi = ops.sum(ops.mul(y_multi, weights))
    with Tape() as tape_plain:
        y_plain = x
        for layer in stack.layers:
            y_plain = kan_layer_forward(y_plain, layer.kan)
        loss_plain = ops.sum(ops.mul(y_plain, weights))

    g_multi = backward(tape_multi, loss_multi)
    g_plain = backward(tape_plain, loss_plain)
    tensors = [x] + stack.parameters()
    grads_equal = all(np.array_equal(grad_of(g_multi, t), grad_of(g_plain, t)) for t in tensors)
    return {
        "seed": seed,
        "widths": "-".join(str(w) for w in case["widths"]),
        "grid_size": case["grid"].grid_size,
        "degree": case["grid"].degree,
        "outputs_equal": bool(np.array_equal(y_multi.data, y_plain.data)),
        "gradients_equal": bool(grads_equal),
    }


class DegeneracyCheck(CheckBase):
    def __init__(self):
        super().__init__("degeneracy")

    def run(self, params: Dict[str, Any]) -> CheckResult:
        base = params.get("seed", 0)
        table: List[Dict[str, Any]] = [degeneracy_case(base + i) for i in range(params.get("n_cases", 3))]
        passed = all(row["outputs_equal"] and row["gradients_equal"] for row in table)
        return CheckResult(name=self.name, passed=passed, metrics={"n_cases": len(table)}, table=table)


def check_multikan_degeneracy(**params: Any) -> CheckResult:
    return DegeneracyCheck()(params)
