"""Numerical verification bench: gradient audits and checkable claims."""
from .check_base import CheckBase, CheckResult, VerifySummary
from .degeneracy import check_multikan_degeneracy
from .gradcheck import AUDITS, TOLERANCES, GradcheckResult, gradcheck, relative_error
from .noise_trend import DEFAULT_LEVELS, NOISE_COLUMNS, check_noise_trend, holdout_data, noise_sweep, trend_holds
from .registry import CheckCapability, CheckRegistry
from .solver_checks import check_adjoint, check_memory, check_rk4_order, retained_buffer_count
from .suite import SUMMARY_NAME, run_checks, write_summary
from .theorem import TARGETS, check_theorem_scaling, pre_floor_slope, theorem_scaling

__all__ = [
    "AUDITS",
    "CheckBase",
    "CheckCapability",
    "CheckRegistry",
    "CheckResult",
    "DEFAULT_LEVELS",
    "GradcheckResult",
    "NOISE_COLUMNS",
    "SUMMARY_NAME",
    "TARGETS",
    "TOLERANCES",
    "VerifySummary",
    "check_adjoint",
    "check_memory",
    "check_multikan_degeneracy",
    "check_noise_trend",
    "check_rk4_order",
    "check_theorem_scaling",
    "gradcheck",
    "holdout_data",
    "noise_sweep",
    "pre_floor_slope",
    "relative_error",
    "retained_buffer_count",
    "run_checks",
    "theorem_scaling",
    "trend_holds",
    "write_summary",
]
