"""Second-order neural-ODE machinery: RK4, adjoint gradients, dynamics nets."""
from .adjoint import adjoint_backward, ode_solve_adjoint
from .dynamics import (
    ConstantDynamics,
    ConstantVelocity,
    DynamicsNet,
    HarmonicDynamics,
    VelocityNet,
    ZeroDynamics,
)
from .rk4 import rk4_arrays, rk4_combine, rk4_step
from .solver import ode_solve, sono_integrate
from .state import IntegrationConfig, OdeState

__all__ = [
    "ConstantDynamics",
    "ConstantVelocity",
    "DynamicsNet",
    "HarmonicDynamics",
    "IntegrationConfig",
    "OdeState",
    "VelocityNet",
    "ZeroDynamics",
    "adjoint_backward",
    "ode_solve",
    "ode_solve_adjoint",
    "rk4_arrays",
    "rk4_combine",
    "rk4_step",
    "sono_integrate",
]
