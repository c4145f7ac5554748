"""
Base class for all verification checks.
Defines the standard run interface plus logging and error-handling hooks.
"""
from abc import ABC, abstractmethod
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field

from src.utils.monitoring import get_logger


class CheckResult(BaseModel):
    name: str
    passed: bool
    metrics: Dict[str, Any] = Field(default_factory=dict)
    table: List[Dict[str, Any]] = Field(default_factory=list)
    error: Optional[str] = None


class VerifySummary(BaseModel):
    passed: bool
    checks: List[CheckResult]


class CheckBase(ABC):
    def __init__(self, name: str):
        self.name = name
        self.logger = get_logger("verify", check=name)

    @abstractmethod
    def run(self, params: Dict[str, Any]) -> CheckResult:
        """
        Execute the check with the given parameters (seed, sizes, paths, ...).
        Must be implemented by all checks.
        """

    def __call__(self, params: Optional[Dict[str, Any]] = None) -> CheckResult:
        params = params or {}
        self.logger.info("check_started", **{k: v for k, v in params.items() if isinstance(v, (int, float, str))})
        try:
            result = self.run(params)
        except Exception as exc:  # noqa: BLE001
            result = self.handle_error(exc, params)
        self.logger.info("check_finished", passed=result.passed, **_scalars(result.metrics))
        return result

    def handle_error(self, error: Exception, context: Optional[Dict[str, Any]] = None) -> CheckResult:
        self.logger.error("check_error", error=str(error), error_type=type(error).__name__)
        return CheckResult(
            name=self.name,
            passed=False,
            error=f"{type(error).__name__}: {error}",
            metrics={"context": {k: str(v) for k, v in (context or {}).items()}},
        )


def _scalars(metrics: Dict[str, Any]) -> Dict[str, Any]:
    return {k: v for k, v in metrics.items() if isinstance(v, (bool, int, float, str)) or v is None}
