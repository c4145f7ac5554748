"""
Checks for the ODE machinery: RK4 convergence order, adjoint gradients
against the unrolled tape, and the constant-memory contract.
"""
from typing import Any, Dict, List, Tuple

import numpy as np

from src.odeint import (
    ConstantDynamics,
    DynamicsNet,
    HarmonicDynamics,
    IntegrationConfig,
    OdeState,
    ZeroDynamics,
    ode_solve,
)
from src.tensor import Module, Parameter, Tape, Tensor, backward, grad_of, ops, precision

from .check_base import CheckBase, CheckResult

RK4_STEP_SIZES = (0.2, 0.1, 0.05, 0.025)
RK4_SLOPE_RANGE = (3.7, 4.3)
EXACT_TOL = 1e-12
ADJOINT_TOL = 1e-4


def _state(x: np.ndarray, v: np.ndarray, requires_grad: bool = False) -> OdeState:
    return OdeState(
        Tensor(x, requires_grad=requires_grad, name="x0"),
        Tensor(v, requires_grad=requires_grad, name="v0"),
    )


def _solve(state: OdeState, cfg: IntegrationConfig, f: Module) -> Tuple[np.ndarray, np.ndarray]:
    out = ode_solve(state, cfg, f)
    return out.x.data, out.v.data


def log_log_slope(xs, ys) -> float:
    return float(np.polyfit(np.log(np.asarray(xs, dtype=np.float64)), np.log(np.asarray(ys, dtype=np.float64)), 1)[0])


class Rk4OrderCheck(CheckBase):
    """Global error of the harmonic oscillator over an h sweep, plus the exact cases."""

    def __init__(self):
        super().__init__("rk4")

    def run(self, params: Dict[str, Any]) -> CheckResult:
        step_sizes = params.get("step_sizes", RK4_STEP_SIZES)
        rng = np.random.default_rng(params.get("seed", 0))
        table: List[Dict[str, Any]] = []
        with precision("float64"):
            x0 = np.ones(1)
            v0 = np.zeros(1)
            errors = []
            for h in step_sizes:
                cfg = IntegrationConfig(t0=0.0, t1=1.0, steps=int(round(1.0 / h)))
                x1, v1 = _solve(_state(x0, v0), cfg, HarmonicDynamics())
                err = max(abs(x1[0] - np.cos(1.0)), abs(v1[0] + np.sin(1.0)))
                errors.append(err)
                table.append({"case": "harmonic", "h": cfg.h, "steps": cfg.steps, "error": err})

            xr, vr = rng.normal(size=(2, 3)), rng.normal(size=(2, 3))
            c = float(rng.normal())
            exact_ok = True
            for h in step_sizes:
                cfg = IntegrationConfig(t0=0.0, t1=1.0, steps=int(round(1.0 / h)))
                span = cfg.t1 - cfg.t0

                x1, v1 = _solve(_state(xr, vr), cfg, ZeroDynamics())
                zero_err = float(max(np.abs(x1 - (xr + span * vr)).max(), np.abs(v1 - vr).max()))

                x1, v1 = _solve(_state(xr, vr), cfg, ConstantDynamics(c))
                const_err = float(
                    max(
                        np.abs(x1 - (xr + span * vr + 0.5 * c * span ** 2)).max(),
                        np.abs(v1 - (vr + c * span)).max(),
                    )
                )
                exact_ok = exact_ok and zero_err <= EXACT_TOL and const_err <= EXACT_TOL
                table.append({"case": "zero", "h": cfg.h, "steps": cfg.steps, "error": zero_err})
                table.append({"case": "constant", "h": cfg.h, "steps": cfg.steps, "error": const_err})

        slope = log_log_slope([row["h"] for row in table[: len(step_sizes)]], errors)
        lo, hi = RK4_SLOPE_RANGE
        return CheckResult(
            name=self.name,
            passed=bool(lo <= slope <= hi and exact_ok),
            metrics={"slope": slope, "slope_min": lo, "slope_max": hi, "exact_cases_ok": exact_ok},
            table=table,
        )


class _IdleParameterDynamics(Module):
    """Zero vector field that still owns a parameter."""

    def __init__(self):
        self.weight = Parameter(np.full(1, 0.5), name="idle.weight")

    def forward(self, x: Tensor, v: Tensor, t: float) -> Tensor:
        return ops.scale(ops.mul(v, self.weight), 0.0)


def _norm_rel(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-12))


def _gradients(
    f: Module,
    x0: np.ndarray,
    v0: np.ndarray,
    cfg: IntegrationConfig,
    loss_fn,
) -> Tuple[List[np.ndarray], List[np.ndarray]]:
    state = _state(x0, v0, requires_grad=True)
    with Tape() as tape:
        out = ode_solve(state, cfg, f)
        loss = loss_fn(out)
    grads = backward(tape, loss)
    return (
        [grad_of(grads, state.x), grad_of(grads, state.v)],
        [grad_of(grads, p) for p in f.parameters()],
    )


class AdjointCheck(CheckBase):
    """Adjoint gradients against analytic values and against direct backprop."""

    def __init__(self):
        super().__init__("adjoint")

    def run(self, params: Dict[str, Any]) -> CheckResult:
        seed = params.get("seed", 0)
        steps = params.get("steps", 32)
        rng = np.random.default_rng(seed)
        table: List[Dict[str, Any]] = []
        with precision("float64"):
            cfg = IntegrationConfig(t0=0.0, t1=1.0, steps=4)
            x0, v0 = rng.normal(size=(2, 1, 2, 3, 3))

            (gx, gv), _ = _gradients(ZeroDynamics(), x0, v0, cfg, lambda s: ops.sum(s.x))
            span = cfg.t1 - cfg.t0
            linear_err = max(np.abs(gx - 1.0).max(), np.abs(gv - span).max())
            table.append({"case": "zero_dynamics_linear_loss", "max_abs_error": float(linear_err)})

            idle = _IdleParameterDynamics()
            _, (g_idle,) = _gradients(idle, x0, v0, cfg, lambda s: ops.sum(ops.mul(s.x, s.x)))
            idle_err = float(np.abs(g_idle).max())
            table.append({"case": "parameter_independent_loss", "max_abs_error": idle_err})

            f = DynamicsNet(2, hidden=3, rng=rng, name="f")
            x0, v0 = rng.normal(size=(2, 1, 2, 4, 4))
            wx, wv = rng.normal(size=(2, 1, 2, 4, 4))

            def loss_fn(s: OdeState) -> Tensor:
                return ops.add(
                    ops.sum(ops.mul(s.x, Tensor(wx))),
                    ops.sum(ops.mul(s.v, Tensor(wv))),
                )

            adj_state, adj_params = _gradients(f, x0, v0, IntegrationConfig(steps=steps, adjoint=True), loss_fn)
            dir_state, dir_params = _gradients(f, x0, v0, IntegrationConfig(steps=steps, adjoint=False), loss_fn)
            names = ["x0", "v0"] + [name for name, _ in f.named_parameters()]
            worst = 0.0
            for name, a, d in zip(names, adj_state + adj_params, dir_state + dir_params):
                err = _norm_rel(a, d)
                worst = max(worst, err)
                table.append({"case": f"dynamics_net:{name}", "max_abs_error": err})

        exact_ok = linear_err <= EXACT_TOL and idle_err == 0.0
        return CheckResult(
            name=self.name,
            passed=bool(exact_ok and worst < ADJOINT_TOL),
            metrics={
                "max_rel_error": worst,
                "tolerance": ADJOINT_TOL,
                "steps": steps,
                "n_params": f.num_parameters(),
                "analytic_cases_ok": bool(exact_ok),
            },
            table=table,
        )


def retained_buffer_count(steps: int, adjoint: bool = True, seed: int = 0, channels: int = 2, size: int = 8) -> int:
    """Arrays kept for backward by one ODE solve recorded on a fresh tape."""
    rng = np.random.default_rng(seed)
    f = DynamicsNet(channels, rng=rng)
    x0, v0 = rng.normal(size=(2, 1, channels, size, size))
    state = _state(x0, v0, requires_grad=True)
    with Tape() as tape:
        ode_solve(state, IntegrationConfig(steps=steps, adjoint=adjoint), f)
    return tape.retained_buffers()


class MemoryCheck(CheckBase):
    def __init__(self):
        super().__init__("memory")

    def run(self, params: Dict[str, Any]) -> CheckResult:
        seed = params.get("seed", 0)
        steps = params.get("step_counts", (2, 64))
        table = [
            {
                "steps": n,
                "adjoint_buffers": retained_buffer_count(n, adjoint=True, seed=seed),
                "direct_buffers": retained_buffer_count(n, adjoint=False, seed=seed),
            }
            for n in steps
        ]
        adjoint_counts = {row["adjoint_buffers"] for row in table}
        return CheckResult(
            name=self.name,
            passed=len(adjoint_counts) == 1,
            metrics={
                "adjoint_buffers": table[0]["adjoint_buffers"],
                "direct_buffers_min": min(row["direct_buffers"] for row in table),
                "direct_buffers_max": max(row["direct_buffers"] for row in table),
            },
            table=table,
        )


def check_rk4_order(**params: Any) -> CheckResult:
    return Rk4OrderCheck()(params)


def check_adjoint(**params: Any) -> CheckResult:
    return AdjointCheck()(params)


def check_memory(**params: Any) -> CheckResult:
    return MemoryCheck()(params)
