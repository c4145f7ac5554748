"""
BCE training loop with Adam and early stopping on validation Dice.

Each epoch shuffles the training items with the run seed, steps Adam once
per batch and evaluates validation Dice. The best parameters seen so far are
kept; training stops when the validation Dice has not strictly improved for
``early_stop_patience`` consecutive rounds or after ``max_epochs``.
"""
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np
import pandas as pd

from src.net import ImplicitUKan
from src.tensor import Tape, Tensor, backward
from src.utils.errors import ConfigError, NonFiniteError, TrainingError
from src.utils.monitoring import get_logger

from .checkpoint import save_checkpoint
from .data import SegmentationDataset, SplitArrays
from .evaluation import evaluate
from .loss import bce_loss
from .optim import Adam
from .state import TrainingState

HISTORY_COLUMNS = ["epoch", "train_loss", "val_dice", "val_hd95"]
CHECKPOINT_NAME = "checkpoint.iuk2"
HISTORY_NAME = "history.csv"

logger = get_logger("trainer")


@dataclass
class TrainConfig:
    lr: float = 1e-4
    max_epochs: int = 500
    batch_size: int = 4
    early_stop_patience: int = 25
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    val_fraction: float = 0.1
    image_size: List[int] = field(default_factory=lambda: [64, 64])
    threads: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        # lr == 0 is allowed: it freezes the model (used by determinism and early-stop checks).
        if self.lr < 0:
            raise ConfigError(f"train.lr must be >= 0, got {self.lr}")
        if self.early_stop_patience < 1:
            raise ConfigError(f"train.early_stop_patience must be >= 1, got {self.early_stop_patience}")
        if self.batch_size < 1 or self.max_epochs < 1:
            raise ConfigError("train.batch_size and train.max_epochs must be >= 1")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ConfigError(f"train.val_fraction must lie in [0, 1), got {self.val_fraction}")
        if len(self.image_size) != 2 or min(self.image_size) < 1:
            raise ConfigError(f"train.image_size must be two positive extents, got {self.image_size}")


@dataclass
class TrainResult:
    state: TrainingState
    history: pd.DataFrame
    checkpoint_path: Optional[Path] = None


def history_frame(rows: List[Dict[str, float]]) -> pd.DataFrame:
    return pd.DataFrame(rows, columns=HISTORY_COLUMNS)


def train(
    model: ImplicitUKan,
    dataset: Union[SegmentationDataset, SplitArrays],
    cfg: TrainConfig,
    out_dir: Optional[Union[str, Path]] = None,
    checkpoint_path: Optional[Union[str, Path]] = None,
) -> TrainResult:
    """
    Train ``model`` in place; on return it holds the best parameters.

    A SegmentationDataset supplies its train and val splits (val falls back
    to train when empty); bare SplitArrays are used for both.
    """
    splits: Dict[str, List[str]] = {}
    if isinstance(dataset, SegmentationDataset):
        train_data = dataset.load("train", threads=cfg.threads)
        val_data = dataset.load("val", threads=cfg.threads)
        splits = dataset.splits
    else:
        train_data = val_data = dataset
    if len(train_data) == 0:
        raise TrainingError("training split is empty")

    state = fit(model, train_data, val_data, cfg)
    history = history_frame(state.history)

    saved = None
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        history.to_csv(out / HISTORY_NAME, index=False)
        saved = save_checkpoint(
            checkpoint_path or out / CHECKPOINT_NAME,
            model,
            epoch=state.epoch,
            best_metric=state.best_metric,
            best_epoch=state.best_epoch,
            seed=cfg.seed,
            image_size=list(cfg.image_size),
            splits=splits,
        )
    return TrainResult(state=state, history=history, checkpoint_path=saved)


def fit(
    model: ImplicitUKan,
    train_data: SplitArrays,
    val_data: SplitArrays,
    cfg: TrainConfig,
    state: Optional[TrainingState] = None,
) -> TrainingState:
    params = model.parameters()
    dtype = params[0].dtype
    optimizer = Adam(params, lr=cfg.lr, betas=(cfg.beta1, cfg.beta2), eps=cfg.adam_eps)
    rng = np.random.default_rng(cfg.seed)
    state = state if state is not None else TrainingState()
    n = len(train_data)

    for epoch in range(1, cfg.max_epochs + 1):
        state.epoch = epoch
        order = rng.permutation(n)
        losses = []
        for start in range(0, n, cfg.batch_size):
            idx = np.sort(order[start:start + cfg.batch_size])
            state.step += 1
            try:
                with Tape() as tape:
                    logits = model(Tensor(train_data.images[idx], dtype=dtype))
                    loss = bce_loss(logits, train_data.masks[idx][:, None])
                value = loss.item()
                if not np.isfinite(value):
                    state.set_error(f"non-finite loss {value}")
                    raise TrainingError(f"non-finite loss {value}", epoch=epoch, step=state.step)
                optimizer.step(backward(tape, loss))
            except NonFiniteError as exc:
                state.set_error(str(exc))
                raise TrainingError(f"non-finite values: {exc}", epoch=epoch, step=state.step) from exc
            losses.append(value)

        report = evaluate(model, val_data, threads=cfg.threads)
        agg = report.aggregate
        row = {
            "epoch": epoch,
            "train_loss": float(np.mean(losses)),
            "val_dice": agg.dice,
            "val_hd95": agg.hd95,
        }
        state.history.append(row)
        improved = state.record_validation(agg.dice, model.state_dict())
        logger.info("epoch_complete", improved=improved, **row)

        if state.rounds_without_improvement >= cfg.early_stop_patience:
            logger.info("early_stop", epoch=epoch, best_epoch=state.best_epoch, best_dice=state.best_metric)
            state.finish("early_stop")
            break
    else:
        state.finish("max_epochs")

    if state.best_params is not None:
        model.load_state_dict(state.best_params)
    return state
