"""Check capability registry"""
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Type

from .check_base import CheckBase
from .degeneracy import DegeneracyCheck
from .noise_trend import NoiseTrendCheck
from .solver_checks import AdjointCheck, MemoryCheck, Rk4OrderCheck
from .theorem import TheoremCheck


@dataclass
class CheckCapability:
    """What a check needs and how long it takes"""
    check_class: Type[CheckBase]
    required_params: List[str] = field(default_factory=list)
    optional_params: List[str] = field(default_factory=list)
    slow: bool = False
    description: str = ""


class CheckRegistry:
    """Central registry of all verification checks"""

    def __init__(self):
        self.checks: Dict[str, CheckCapability] = {}
        self._register_checks()

    def _register_checks(self):
        self.checks["theorem"] = CheckCapability(
            check_class=TheoremCheck,
            optional_params=["seed", "target", "degree", "grid_sizes", "adam_steps", "lm_iterations"],
            slow=True,
            description="Sup-norm error of a fitted KAN falls like G^-(k+1) with grid size",
        )
        self.checks["rk4"] = CheckCapability(
            check_class=Rk4OrderCheck,
            optional_params=["seed", "step_sizes"],
            description="RK4 global error on the harmonic oscillator has order 4; polynomial flows are exact",
        )
        self.checks["adjoint"] = CheckCapability(
            check_class=AdjointCheck,
            optional_params=["seed", "steps"],
            description="Adjoint gradients match analytic values and the unrolled tape",
        )
        self.checks["memory"] = CheckCapability(
            check_class=MemoryCheck,
            optional_params=["seed", "step_counts"],
            description="Buffers retained by an adjoint-mode solve do not grow with the step count",
        )
        self.checks["degeneracy"] = CheckCapability(
            check_class=DegeneracyCheck,
            optional_params=["seed", "n_cases"],
            description="MultiKAN stacks without product nodes equal plain KAN stacks bit for bit",
        )
        self.checks["noise"] = CheckCapability(
            check_class=NoiseTrendCheck,
            required_params=["ckpt"],
            optional_params=["seed", "data", "split", "levels", "threads"],
            description="Dice of a trained checkpoint degrades gracefully under Gaussian noise",
        )

    def names(self) -> List[str]:
        return list(self.checks)

    def get(self, name: str) -> Optional[CheckCapability]:
        return self.checks.get(name)

    def create(self, name: str) -> CheckBase:
        capability = self.checks.get(name)
        if capability is None:
            raise KeyError(name)
        return capability.check_class()

    def missing_params(self, name: str, params: Dict[str, object]) -> List[str]:
        return [p for p in self.checks[name].required_params if not params.get(p)]
