from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional


@dataclass
class TrainingState:
    """Progress of one training run"""

    epoch: int = 0
    step: int = 0
    best_metric: float = float("-inf")
    best_epoch: Optional[int] = None
    best_params: Optional[Dict[str, Any]] = None
    rounds_without_improvement: int = 0
    validation_rounds: int = 0

    history: List[Dict[str, float]] = field(default_factory=list)

    # Run metadata
    stop_reason: str = ""
    finished: bool = False
    error: Optional[str] = None

    def record_validation(self, val_dice: float, params: Dict[str, Any]) -> bool:
        """Track the best validation Dice; returns True on strict improvement."""
        self.validation_rounds += 1
        if val_dice > self.best_metric:
            self.best_metric = val_dice
            self.best_epoch = self.epoch
            self.best_params = params
            self.rounds_without_improvement = 0
            return True
        self.rounds_without_improvement += 1
        return False

    def set_error(self, error: str) -> None:
        self.error = error
        self.stop_reason = "error"
        self.finished = True

    def finish(self, reason: str) -> None:
        self.stop_reason = reason
        self.finished = True
