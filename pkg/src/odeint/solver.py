"""Fixed-step ODE solves and the second-order (SONO) integration entry point."""
from src.tensor import Module, Tensor, current_tape

from .adjoint import integrate_steps, ode_solve_adjoint
from .state import IntegrationConfig, OdeState


def ode_solve(state0: OdeState, cfg: IntegrationConfig, f: Module) -> OdeState:
    """
    Integrate from cfg.t0 to cfg.t1 in cfg.steps RK4 steps.

    With a tape active and cfg.adjoint set, the whole solve is one tape entry
    holding only the initial and final states; otherwise every step is
    recorded (direct mode) or nothing is (no tape).
    """
    tape = current_tape()
    tracked = tape is not None and (
        state0.x.requires_grad or state0.v.requires_grad or any(p.requires_grad for p in f.parameters())
    )
    if tracked and cfg.adjoint:
        return ode_solve_adjoint(state0, cfg, f)
    return integrate_steps(state0, cfg, f)


def sono_integrate(x0: Tensor, g: Module, f: Module, cfg: IntegrationConfig) -> Tensor:
    """x'' = f(x, x', t) with x(t0) = x0 and x'(t0) = g(x0); returns x(t1)."""
    state = ode_solve(OdeState(x0, g(x0)), cfg, f)
    return state.x
