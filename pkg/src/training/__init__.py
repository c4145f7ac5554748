"""Training harness: loss, optimizer, data, checkpoints, training loop, evaluation."""
from .checkpoint import CheckpointMeta, load_checkpoint, read_checkpoint, run_metadata, save_checkpoint
from .data import DataItem, SegmentationDataset, SplitArrays, load_items
from .evaluation import checkpoint_split, evaluate
from .loss import bce_loss
from .optim import Adam, AdamState, adam_step
from .state import TrainingState
from .synthetic import make_synthetic_items, make_synthetic_sample, write_synthetic_dataset
from .trainer import (
    CHECKPOINT_NAME,
    HISTORY_COLUMNS,
    HISTORY_NAME,
    TrainConfig,
    TrainResult,
    fit,
    history_frame,
    train,
)

__all__ = [
    "Adam",
    "AdamState",
    "CHECKPOINT_NAME",
    "CheckpointMeta",
    "DataItem",
    "HISTORY_COLUMNS",
    "HISTORY_NAME",
    "SegmentationDataset",
    "SplitArrays",
    "TrainConfig",
    "TrainResult",
    "TrainingState",
    "adam_step",
    "bce_loss",
    "checkpoint_split",
    "evaluate",
    "fit",
    "history_frame",
    "load_checkpoint",
    "load_items",
    "make_synthetic_items",
    "make_synthetic_sample",
    "read_checkpoint",
    "run_metadata",
    "save_checkpoint",
    "train",
    "write_synthetic_dataset",
]
