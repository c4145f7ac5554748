"""
Robustness of a trained checkpoint to additive Gaussian noise.

Dice must not increase as the noise level grows, and the relative drop at
level 0.2 must stay within MAX_DROP_AT_0_2.
"""
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import pandas as pd

from src.net import ImplicitUKan
from src.training import CheckpointMeta, SplitArrays, checkpoint_split, evaluate, load_checkpoint, make_synthetic_items
from src.utils.errors import CheckpointError

from .check_base import CheckBase, CheckResult

DEFAULT_LEVELS = (0.0, 0.2, 0.4)
MAX_DROP_AT_0_2 = 0.15
HOLDOUT_SIZE = 64
NOISE_COLUMNS = ["level", "dice", "hd95", "acc", "iou", "f1"]


def noise_sweep(
    model: ImplicitUKan,
    data: SplitArrays,
    levels: Sequence[float] = DEFAULT_LEVELS,
    seed: int = 0,
    threads: int = 1,
) -> pd.DataFrame:
    rows = []
    for level in levels:
        agg = evaluate(model, data, threads=threads, noise_level=float(level), noise_seed=seed).aggregate
        rows.append(
            {"level": float(level), "dice": agg.dice, "hd95": agg.hd95, "acc": agg.acc, "iou": agg.iou, "f1": agg.f1}
        )
    return pd.DataFrame(rows, columns=NOISE_COLUMNS)


def holdout_data(
    meta: CheckpointMeta,
    data_root: Optional[Union[str, Path]] = None,
    split: str = "test",
    seed: int = 0,
    threads: int = 1,
) -> SplitArrays:
    """A split of a real dataset, or a seeded synthetic holdout matching the checkpoint."""
    if data_root:
        return checkpoint_split(data_root, meta, split, threads=threads)
    return make_synthetic_items(
        HOLDOUT_SIZE,
        size=tuple(meta.image_size),
        seed=seed + 1,
        channels=meta.model_cfg.in_channels,
        prefix="holdout",
    )


def trend_holds(frame: pd.DataFrame, max_drop: float = MAX_DROP_AT_0_2) -> Dict[str, Any]:
    ordered = frame.sort_values("level")
    dice = ordered["dice"].tolist()
    monotone = all(b <= a for a, b in zip(dice, dice[1:]))
    drop: Optional[float] = None
    levels = ordered["level"].tolist()
    if 0.0 in levels and 0.2 in levels:
        clean = dice[levels.index(0.0)]
        drop = (clean - dice[levels.index(0.2)]) / clean if clean > 0 else 0.0
    return {
        "monotone": monotone,
        "drop_at_0_2": drop,
        "passed": bool(monotone and (drop is None or drop <= max_drop)),
    }


class NoiseTrendCheck(CheckBase):
    def __init__(self):
        super().__init__("noise")

    def run(self, params: Dict[str, Any]) -> CheckResult:
        ckpt = params.get("ckpt")
        if not ckpt:
            raise CheckpointError("the noise check needs a trained checkpoint (--ckpt)")
        model, meta = load_checkpoint(Path(ckpt))
        seed = params.get("seed", 0)
        threads = params.get("threads", 1)
        data = holdout_data(meta, params.get("data"), params.get("split", "test"), seed=seed, threads=threads)
        frame = noise_sweep(model, data, params.get("levels", DEFAULT_LEVELS), seed=seed, threads=threads)
        verdict = trend_holds(frame)
        table: List[Dict[str, Any]] = frame.to_dict(orient="records")
        return CheckResult(
            name=self.name,
            passed=verdict["passed"],
            metrics={
                "monotone": verdict["monotone"],
                "drop_at_0_2": verdict["drop_at_0_2"],
                "max_drop": MAX_DROP_AT_0_2,
                "n_images": len(data),
            },
            table=table,
        )


def check_noise_trend(**params: Any) -> CheckResult:
    return NoiseTrendCheck()(params)
