"""
Argument parsing and dispatch for ``python -m src.cli``.

Precedence for every setting: command-line flag > --set > environment >
--config file > built-in default.
"""
import argparse
import sys
from typing import List, Optional

from src.utils.errors import UKanError
from src.utils.monitoring import get_logger

from . import commands

logger = get_logger("cli")

EPILOG = (
    "Settings resolve as: flag > --set key=value > IUKAN_<SECTION>__<FIELD> environment "
    "> --config file > default. Exit status: 0 success, 1 failed assertion, 2 usage or input error."
)


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key=value or YAML config file")
    parser.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a dotted config key (repeatable)")
    parser.add_argument("--seed", type=int, help="run seed (train.seed)")
    parser.add_argument("--threads", type=int, help="worker threads; 1 is fully deterministic")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--verbose", action="store_true", help="debug logging")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="iukan",
        description="Implicit U-KAN 2.0 segmentation: training, evaluation and numerical verification.",
        epilog=EPILOG,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model; writes checkpoint and history.csv", epilog=EPILOG)
    _common(p)
    p.add_argument("--data", help="dataset root with images/ and masks/")
    p.add_argument("--ckpt", help="checkpoint path (default: <out>/checkpoint.iuk2)")
    p.add_argument("--size", help="input size HxW (train.image_size)")
    p.add_argument("--epochs", type=int, help="maximum epochs (train.max_epochs)")
    p.set_defaults(handler=commands.cmd_train)

    p = sub.add_parser("eval", help="metrics.csv and metrics.json for a checkpoint on a split", epilog=EPILOG)
    _common(p)
    p.add_argument("--ckpt", help="checkpoint to evaluate")
    p.add_argument("--data", help="dataset root")
    p.add_argument("--split", choices=("train", "val", "test"), help="split to evaluate (default val)")
    p.set_defaults(handler=commands.cmd_eval)

    p = sub.add_parser("predict", help="write predicted masks (PNG, 0/255)", epilog=EPILOG)
    _common(p)
    p.add_argument("--ckpt", help="checkpoint to apply")
    p.add_argument("--data", help="folder of images, or a dataset root with images/")
    p.add_argument("--overlay", action="store_true", help="also write images with the mask tinted")
    p.set_defaults(handler=commands.cmd_predict)

    p = sub.add_parser("ablate-noise", help="Dice per Gaussian noise level; writes noise.csv", epilog=EPILOG)
    _common(p)
    p.add_argument("--ckpt", help="trained checkpoint")
    p.add_argument("--data", help="dataset root (default: seeded synthetic holdout)")
    p.add_argument("--split", choices=("train", "val", "test"), help="split of --data (default test)")
    p.add_argument("--levels", help="comma-separated noise levels (default 0,0.2,0.4)")
    p.set_defaults(handler=commands.cmd_ablate_noise)

    p = sub.add_parser("verify", help="run verification checks; writes verify.json", epilog=EPILOG)
    _common(p)
    p.add_argument("--check", action="append", help="check name(s); default all (noise needs --ckpt)")
    p.add_argument("--ckpt", help="checkpoint for the noise check")
    p.add_argument("--data", help="dataset root for the noise check")
    p.add_argument("--split", choices=("train", "val", "test"), help="split for the noise check")
    p.add_argument("--levels", help="noise levels for the noise check")
    p.set_defaults(handler=commands.cmd_verify)

    p = sub.add_parser("gradcheck", help="finite-difference gradient audits", epilog=EPILOG)
    _common(p)
    p.add_argument("--module", choices=("ops", "kan", "odeint", "model", "all"), default="all")
    p.set_defaults(handler=commands.cmd_gradcheck)

    p = sub.add_parser("synth", help="write a synthetic ellipse dataset", epilog=EPILOG)
    _common(p)
    p.add_argument("--size", help="image size HxW (default 64x64)")
    p.add_argument("--n-train", type=int, default=8)
    p.add_argument("--n-val", type=int, default=0)
    p.add_argument("--n-test", type=int, default=0)
    p.add_argument("--validate-on-train", action="store_true", help="val.txt repeats the training stems")
    p.set_defaults(handler=commands.cmd_synth)

    p = sub.add_parser("dump-edges", help="sample KAN edge functions of a tokenized block", epilog=EPILOG)
    _common(p)
    p.add_argument("--ckpt", help="trained checkpoint")
    p.add_argument("--block", help="module name, e.g. encoder.2 (default: first tokenized block)")
    p.add_argument("--samples", type=int, default=101)
    p.add_argument("--max-edges", type=int, default=16, help="edges per layer")
    p.set_defaults(handler=commands.cmd_dump_edges)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except UKanError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        logger.error("unexpected_error", error=str(exc), error_type=type(exc).__name__)
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
