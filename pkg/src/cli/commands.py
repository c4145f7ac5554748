"""
Command handlers. Each takes the parsed argparse namespace and returns an
exit code: 0 when every requested assertion holds, 1 when one fails.
User errors propagate as UKanError and are reported by main().
"""
import argparse
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from PIL import Image

from src.kan import edge_function
from src.net import SonoMultiKanBlock, build_model, predict_masks
from src.tensor import Tensor
from src.training import (
    CHECKPOINT_NAME,
    HISTORY_NAME,
    SegmentationDataset,
    checkpoint_split,
    evaluate,
    load_checkpoint,
    train,
    write_synthetic_dataset,
)
from src.training.data import IMAGE_SUFFIXES, load_image
from src.utils.config import ExperimentConfig, load_config, parse_assignments
from src.utils.errors import ConfigError, DataError
from src.utils.monitoring import configure_logging, get_logger
from src.verify import AUDITS, TOLERANCES, holdout_data, noise_sweep, run_checks, trend_holds, write_summary

logger = get_logger("cli")

METRICS_CSV = "metrics.csv"
METRICS_JSON = "metrics.json"
NOISE_CSV = "noise.csv"
GRADCHECK_CSV = "gradcheck.csv"
EDGES_CSV = "edges.csv"
MASKS_DIR = "masks"
OVERLAYS_DIR = "overlays"


def parse_size(text: str) -> List[int]:
    try:
        h, w = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise ConfigError(f"--size expects HxW (e.g. 64x64), got {text!r}") from None
    if h < 1 or w < 1:
        raise ConfigError(f"--size extents must be positive, got {text!r}")
    return [h, w]


def parse_levels(text: str) -> List[float]:
    try:
        levels = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"--levels expects a comma-separated list of numbers, got {text!r}") from None
    if not levels or any(v < 0 for v in levels):
        raise ConfigError(f"--levels needs non-negative values, got {text!r}")
    return levels


def experiment_config(args: argparse.Namespace) -> ExperimentConfig:
    """Config file, environment and --set, with the dedicated flags on top."""
    overrides: Dict[str, Any] = parse_assignments(getattr(args, "set", None))
    if getattr(args, "seed", None) is not None:
        overrides["train.seed"] = args.seed
    if getattr(args, "threads", None) is not None:
        overrides["train.threads"] = args.threads
    if getattr(args, "size", None):
        overrides["train.image_size"] = parse_size(args.size)
    if getattr(args, "epochs", None) is not None:
        overrides["train.max_epochs"] = args.epochs
    cfg = load_config(getattr(args, "config", None), overrides)
    configure_logging("DEBUG" if getattr(args, "verbose", False) else cfg.log_level, cfg.json_logs)
    return cfg


def _out_dir(args: argparse.Namespace) -> Path:
    if not args.out:
        raise ConfigError("--out is required for this command")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _require(value: Optional[str], flag: str) -> str:
    if not value:
        raise ConfigError(f"{flag} is required for this command")
    return value


def cmd_train(args: argparse.Namespace) -> int:
    cfg = experiment_config(args)
    out = _out_dir(args)
    dataset = SegmentationDataset(
        _require(args.data, "--data"),
        size=tuple(cfg.train.image_size),
        channels=cfg.model.in_channels,
        val_fraction=cfg.train.val_fraction,
        seed=cfg.train.seed,
    )
    cfg.model.check_input_size(*cfg.train.image_size)
    model = build_model(cfg.model, seed=cfg.train.seed)
    result = train(model, dataset, cfg.train, out_dir=out, checkpoint_path=args.ckpt or out / CHECKPOINT_NAME)
    state = result.state
    print(
        f"trained {state.epoch} epochs ({state.stop_reason}); best val dice {state.best_metric:.6f} "
        f"at epoch {state.best_epoch}; checkpoint {result.checkpoint_path}; history {out / HISTORY_NAME}"
    )
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    experiment_config(args)
    out = _out_dir(args)
    model, meta = load_checkpoint(_require(args.ckpt, "--ckpt"))
    data = checkpoint_split(_require(args.data, "--data"), meta, args.split or "val", threads=args.threads or 1)
    report = evaluate(model, data, threads=args.threads or 1)
    report.to_csv(out / METRICS_CSV)
    report.to_json(out / METRICS_JSON)
    agg = report.aggregate
    print(f"dice {agg.dice:.6f}  hd95 {agg.hd95:.4f}  acc {agg.acc:.6f}  iou {agg.iou:.6f}  f1 {agg.f1:.6f}  (n={agg.n_images})")
    return 0


def _image_paths(root: Path) -> List[Path]:
    folder = root / "images" if (root / "images").is_dir() else root
    if not folder.is_dir():
        raise DataError("image directory not found", path=folder)
    paths = sorted(p for p in folder.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    if not paths:
        raise DataError("no images found", path=folder)
    return paths


def overlay(image: np.ndarray, mask: np.ndarray, alpha: float = 0.4) -> np.ndarray:
    """RGB uint8 rendering of a [C, H, W] image with the mask tinted red."""
    rgb = np.repeat(image, 3, axis=0) if image.shape[0] == 1 else image[:3]
    rgb = rgb.transpose(1, 2, 0).astype(np.float64)
    tint = np.array([1.0, 0.0, 0.0])
    rgb = np.where(mask[..., None] > 0, (1.0 - alpha) * rgb + alpha * tint, rgb)
    return np.round(np.clip(rgb, 0.0, 1.0) * 255).astype(np.uint8)


def cmd_predict(args: argparse.Namespace) -> int:
    experiment_config(args)
    out = _out_dir(args)
    model, meta = load_checkpoint(_require(args.ckpt, "--ckpt"))
    size = tuple(meta.image_size)
    channels = model.cfg.in_channels
    mask_dir = out / MASKS_DIR
    mask_dir.mkdir(exist_ok=True)
    overlay_dir = out / OVERLAYS_DIR
    if args.overlay:
        overlay_dir.mkdir(exist_ok=True)

    dtype = model.parameters()[0].dtype
    paths = _image_paths(Path(_require(args.data, "--data")))
    for path in paths:
        image = load_image(path, size, channels)
        mask = predict_masks(model, Tensor(image[None], dtype=dtype))[0]
        Image.fromarray((mask * 255).astype(np.uint8)).save(mask_dir / f"{path.stem}.png")
        if args.overlay:
            Image.fromarray(overlay(image, mask)).save(overlay_dir / f"{path.stem}.png")
    logger.info("predictions_written", n_images=len(paths), out=str(mask_dir))
    print(f"wrote {len(paths)} masks to {mask_dir}")
    return 0


def cmd_ablate_noise(args: argparse.Namespace) -> int:
    cfg = experiment_config(args)
    out = _out_dir(args)
    model, meta = load_checkpoint(_require(args.ckpt, "--ckpt"))
    levels = parse_levels(args.levels) if args.levels else [0.0, 0.2, 0.4]
    data = holdout_data(meta, args.data, args.split or "test", seed=cfg.train.seed, threads=cfg.train.threads)
    frame = noise_sweep(model, data, levels, seed=cfg.train.seed, threads=cfg.train.threads)
    frame.to_csv(out / NOISE_CSV, index=False)
    verdict = trend_holds(frame)
    print(frame.to_string(index=False))
    print(f"monotone={verdict['monotone']} drop_at_0.2={verdict['drop_at_0_2']} passed={verdict['passed']}")
    return 0 if verdict["passed"] else 1


def cmd_verify(args: argparse.Namespace) -> int:
    cfg = experiment_config(args)
    out = _out_dir(args)
    params: Dict[str, Any] = {"seed": cfg.train.seed, "threads": cfg.train.threads}
    for key in ("ckpt", "data", "split"):
        if getattr(args, key, None):
            params[key] = getattr(args, key)
    if args.levels:
        params["levels"] = parse_levels(args.levels)
    names = [n for group in (args.check or []) for n in group.split(",") if n]
    summary = run_checks(names or None, params)
    write_summary(summary, out)
    for result in summary.checks:
        shown = {k: v for k, v in result.metrics.items() if isinstance(v, (bool, int, float, str))}
        print(f"{result.name:<11} {'PASS' if result.passed else 'FAIL'}  {shown}" + (f"  {result.error}" if result.error else ""))
    return 0 if summary.passed else 1


def cmd_gradcheck(args: argparse.Namespace) -> int:
    cfg = experiment_config(args)
    modules = list(AUDITS) if args.module in (None, "all") else [args.module]
    rows = []
    for module in modules:
        for name, result in AUDITS[module](seed=cfg.train.seed).items():
            rows.append(
                {
                    "module": module,
                    "check": name,
                    "max_rel_error": result.max_rel_error,
                    "tolerance": TOLERANCES[module],
                    "n_checked": result.n_checked,
                    "worst": f"{result.worst[0]}[{result.worst[1]}]",
                    "passed": result.max_rel_error < TOLERANCES[module],
                }
            )
    frame = pd.DataFrame(rows)
    if args.out:
        frame.to_csv(_out_dir(args) / GRADCHECK_CSV, index=False)
    print(frame.to_string(index=False))
    return 0 if frame["passed"].all() else 1


def cmd_synth(args: argparse.Namespace) -> int:
    cfg = experiment_config(args)
    size: Tuple[int, int] = tuple(parse_size(args.size)) if args.size else (64, 64)
    splits = write_synthetic_dataset(
        _out_dir(args),
        n_train=args.n_train,
        n_val=args.n_val,
        n_test=args.n_test,
        size=size,
        seed=cfg.train.seed,
        validate_on_train=args.validate_on_train,
    )
    print(" ".join(f"{name}={len(stems)}" for name, stems in splits.items()))
    return 0


def cmd_dump_edges(args: argparse.Namespace) -> int:
    experiment_config(args)
    out = _out_dir(args)
    model, _ = load_checkpoint(_require(args.ckpt, "--ckpt"))
    blocks = {name: m for name, m in model.named_modules() if isinstance(m, SonoMultiKanBlock)}
    if not blocks:
        raise ConfigError("the checkpoint's model has no tokenized blocks")
    name = args.block or next(iter(blocks))
    if name not in blocks:
        raise ConfigError(f"unknown block {name!r}; expected one of {list(blocks)}")

    rows = []
    for depth, layer in enumerate(blocks[name].tok.multikan.layers):
        kan = layer.kan
        xs = np.linspace(kan.grid.lo, kan.grid.hi, args.samples)
        edges = [(j, i) for j in range(kan.n_out) for i in range(kan.n_in)][: args.max_edges]
        for j, i in edges:
            for x, phi in zip(xs, edge_function(kan, j, i, xs)):
                rows.append({"block": name, "layer": depth, "out": j, "in": i, "x": float(x), "phi": float(phi)})
    pd.DataFrame(rows, columns=["block", "layer", "out", "in", "x", "phi"]).to_csv(out / EDGES_CSV, index=False)
    print(f"wrote {len(rows)} samples from block {name} to {out / EDGES_CSV}")
    return 0
