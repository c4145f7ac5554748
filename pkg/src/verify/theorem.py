"""
Grid-scaling of KAN approximation error.

A fixed smooth target is fitted with a stack of degree-k spline layers on
successively finer grids G. The sup-norm error on a held-out grid should
fall like G^-(k+1) until it reaches a numerical floor, and the error of the
first derivative one power of G more slowly. Refining the grid of the first
layer alone, with the other layers frozen, must not make the fit worse.
"""
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.kan import BSplineGrid, MultiKan, MultiKanLayer, kan_stack, refine_grid
from src.tensor import precision
from src.utils.errors import ConfigError

from .check_base import CheckBase, CheckResult
from .fitting import (
    adam_warm_start,
    fit_parameters,
    levenberg_marquardt,
    predict,
    regrid,
    solve_last_layer,
    train_rmse,
)
from .solver_checks import log_log_slope

DEFAULT_GRIDS = (3, 5, 10, 20)
ERROR_FLOOR = 1e-9
MAX_SLOPE = -3.0


@dataclass(frozen=True)
class Target:
    name: str
    widths: Tuple[int, ...]
    fn: Callable[[np.ndarray], np.ndarray]
    # Partial derivative with respect to the first input.
    dfdx0: Callable[[np.ndarray], np.ndarray]

    @property
    def n_in(self) -> int:
        return self.widths[0]


def _exp_sin(X: np.ndarray) -> np.ndarray:
    return np.exp(np.sin(np.pi * X[:, 0]) + X[:, 1] ** 2)


def _exp_sin_dx(X: np.ndarray) -> np.ndarray:
    return np.pi * np.cos(np.pi * X[:, 0]) * _exp_sin(X)


TARGETS: Dict[str, Target] = {
    "exp_sin": Target("exp_sin", (2, 1, 1), _exp_sin, _exp_sin_dx),
    "identity": Target("identity", (1, 1), lambda X: X[:, 0].copy(), lambda X: np.ones(len(X))),
}


def dense_grid(n_in: int, lo: float = -1.0, hi: float = 1.0) -> np.ndarray:
    if n_in == 1:
        return np.linspace(lo, hi, 1001)[:, None]
    axis = np.linspace(lo, hi, 101)
    mesh = np.meshgrid(*([axis] * n_in), indexing="ij")
    return np.stack([m.reshape(-1) for m in mesh], axis=1)


def sup_error(model: MultiKan, target: Target, X: np.ndarray) -> float:
    return float(np.max(np.abs(predict(model, X) - target.fn(X))))


def derivative_error(model: MultiKan, target: Target, X: np.ndarray, delta: float = 1e-5) -> float:
    """Sup error of d/dx0 by central differences of the fitted model."""
    shift = np.zeros(X.shape[1])
    shift[0] = delta
    numeric = (predict(model, X + shift) - predict(model, X - shift)) / (2.0 * delta)
    return float(np.max(np.abs(numeric - target.dfdx0(X))))


def pre_floor_slope(
    grid_sizes: Sequence[int],
    errors: Sequence[float],
    floor: float = ERROR_FLOOR,
) -> Tuple[Optional[float], int]:
    """Log-log slope over the leading run of finite, decreasing, above-floor errors."""
    xs: List[float] = []
    ys: List[float] = []
    for g, e in zip(grid_sizes, errors):
        if not np.isfinite(e) or e <= floor or (ys and e >= ys[-1]):
            break
        xs.append(g)
        ys.append(e)
    if len(xs) < 2:
        return None, len(xs)
    return log_log_slope(xs, ys), len(xs)


def _warm_start(
    target: Target,
    degree: int,
    grid_size: int,
    X: np.ndarray,
    y: np.ndarray,
    seed: int,
    restarts: int,
    adam_steps: int,
) -> MultiKan:
    best, best_rmse = None, float("inf")
    for r in range(restarts):
        model = kan_stack(
            list(target.widths),
            grid=BSplineGrid(grid_size=grid_size, degree=degree),
            rng=np.random.default_rng(seed * 1000 + r),
        )
        adam_warm_start(model, X, y, steps=adam_steps)
        model = regrid(model, grid_size, X)
        solve_last_layer(model, X, y)
        rmse = train_rmse(model, X, y)
        if rmse < best_rmse:
            best, best_rmse = model, rmse
    return best


def refine_first_layer(model: MultiKan, X: np.ndarray, y: np.ndarray, iterations: int) -> Dict[str, Any]:
    """Double the first layer's grid and re-fit it alone."""
    before = train_rmse(model, X, y)
    first = model.layers[0]
    refined = MultiKan(
        [MultiKanLayer(refine_grid(first.kan, 2 * first.kan.grid.grid_size), first.n_add, first.n_mul, first.mul_arity)]
        + model.layers[1:]
    )
    levenberg_marquardt(refined, X, y, fit_parameters(refined, layers=[0]), iterations)
    after = train_rmse(refined, X, y)
    return {
        "rmse_before": before,
        "rmse_after": after,
        "not_worse": bool(after <= before * (1.0 + 1e-9) + 1e-12),
        "reduced": bool(after < before),
    }


def theorem_scaling(
    target: str = "exp_sin",
    degree: int = 3,
    grid_sizes: Sequence[int] = DEFAULT_GRIDS,
    seed: int = 0,
    n_train: Optional[int] = None,
    restarts: int = 3,
    adam_steps: int = 1000,
    lm_iterations: int = 25,
    floor: float = ERROR_FLOOR,
) -> Dict[str, Any]:
    if target not in TARGETS:
        raise ConfigError(f"unknown target {target!r}; expected one of {sorted(TARGETS)}")
    if list(grid_sizes) != sorted(set(grid_sizes)) or not grid_sizes:
        raise ConfigError(f"grid sizes must be strictly increasing, got {list(grid_sizes)}")
    fn_target = TARGETS[target]

    with precision("float64"):
        rng = np.random.default_rng(seed)
        n_train = n_train or (400 if fn_target.n_in == 1 else 1600)
        X = rng.uniform(-1.0, 1.0, (n_train, fn_target.n_in))
        y = fn_target.fn(X)
        X_test = dense_grid(fn_target.n_in)
        X_deriv = dense_grid(fn_target.n_in, -0.99, 0.99)

        model = _warm_start(fn_target, degree, grid_sizes[0], X, y, seed, restarts, adam_steps)
        rows: List[Dict[str, Any]] = []
        for i, g in enumerate(grid_sizes):
            model = regrid(model, g, X)
            lm = levenberg_marquardt(model, X, y, fit_parameters(model), lm_iterations * 2 ** i)
            model = regrid(model, g, X)
            solve_last_layer(model, X, y)
            err = sup_error(model, fn_target, X_test)
            rows.append(
                {
                    "grid_size": g,
                    "sup_error": err,
                    "derivative_error": derivative_error(model, fn_target, X_deriv),
                    "train_rmse": train_rmse(model, X, y),
                    "lm_iterations": lm.iterations,
                    "diverged": not np.isfinite(err),
                }
            )
        refinement = refine_first_layer(model, X, y, lm_iterations)

    errors = [row["sup_error"] for row in rows]
    slope, n_used = pre_floor_slope(grid_sizes, errors, floor)
    deriv_slope, _ = pre_floor_slope(grid_sizes, [row["derivative_error"] for row in rows], floor)
    return {
        "target": target,
        "degree": degree,
        "slope": slope,
        "points_used": n_used,
        "derivative_slope": deriv_slope,
        "at_floor": all(e <= floor for e in errors),
        "refinement": refinement,
        "rows": rows,
    }


class TheoremCheck(CheckBase):
    def __init__(self):
        super().__init__("theorem")

    def run(self, params: Dict[str, Any]) -> CheckResult:
        max_slope = params.get("max_slope", MAX_SLOPE)
        keys = ("target", "degree", "grid_sizes", "seed", "n_train", "restarts", "adam_steps", "lm_iterations", "floor")
        outcome = theorem_scaling(**{k: params[k] for k in keys if k in params})
        slope = outcome["slope"]
        scaling_ok = outcome["at_floor"] or (slope is not None and slope <= max_slope)
        refinement = outcome["refinement"]
        return CheckResult(
            name=self.name,
            passed=bool(scaling_ok and refinement["not_worse"]),
            metrics={
                "target": outcome["target"],
                "slope": slope,
                "max_slope": max_slope,
                "theory_slope": -(outcome["degree"] + 1),
                "points_used": outcome["points_used"],
                "derivative_slope": outcome["derivative_slope"],
                "at_floor": outcome["at_floor"],
                "refine_rmse_before": refinement["rmse_before"],
                "refine_rmse_after": refinement["rmse_after"],
                "refine_reduced": refinement["reduced"],
            },
            table=outcome["rows"],
        )


def check_theorem_scaling(**params: Any) -> CheckResult:
    return TheoremCheck()(params)
