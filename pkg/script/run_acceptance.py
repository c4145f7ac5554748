#!/usr/bin/env python3
"""
Run the full acceptance bench through the CLI.

Usage:
    python script/run_acceptance.py [--out acceptance] [--skip-theorem]

Steps (each a `python -m src.cli` subprocess, stopped at the first failure):
- gradient audits of ops, KAN, ODE and the tiny model
- RK4 order, adjoint equivalence, constant memory, MultiKAN degeneracy
- grid-refinement scaling of a fitted KAN (slow)
- overfit run on 8 synthetic images, then the noise trend on its checkpoint
- two identical short runs whose history.csv and checkpoint must match byte for byte
"""
import argparse
import subprocess
import sys
import time
from pathlib import Path

import pandas as pd

ROOT = Path(__file__).parent.parent
OVERFIT_CONFIG = ROOT / "config" / "overfit.yaml"
TINY_CONFIG = ROOT / "config" / "tiny.yaml"


def cli(*args: str) -> int:
    command = [sys.executable, "-m", "src.cli", *args]
    print("$ " + " ".join(command[1:]), flush=True)
    started = time.monotonic()
    code = subprocess.call(command, cwd=str(ROOT))
    print(f"  -> exit {code} in {time.monotonic() - started:.1f}s", flush=True)
    return code


def steps(out: Path, skip_theorem: bool):
    data = out / "overfit_data"
    run = out / "overfit_run"
    yield "gradcheck", ["gradcheck", "--out", str(out / "gradcheck")]
    yield "solver and degeneracy checks", [
        "verify", "--check", "rk4,adjoint,memory,degeneracy", "--out", str(out / "verify"),
    ]
    if not skip_theorem:
        yield "grid scaling", ["verify", "--check", "theorem", "--out", str(out / "theorem")]
    yield "synthetic data", ["synth", "--out", str(data), "--size", "64x64", "--n-train", "8", "--validate-on-train"]
    yield "overfit", ["train", "--config", str(OVERFIT_CONFIG), "--data", str(data), "--out", str(run)]
    yield "noise trend", ["verify", "--check", "noise", "--ckpt", str(run / "checkpoint.iuk2"), "--out", str(out / "noise")]
    for name in ("det_a", "det_b"):
        yield f"determinism run {name}", [
            "train", "--config", str(TINY_CONFIG), "--data", str(data), "--size", "16x16",
            "--epochs", "2", "--threads", "1", "--out", str(out / name),
        ]


def same_bytes(a: Path, b: Path) -> bool:
    return a.read_bytes() == b.read_bytes()


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--out", default="acceptance")
    parser.add_argument("--skip-theorem", action="store_true")
    args = parser.parse_args()
    out = (ROOT / args.out).resolve()
    out.mkdir(parents=True, exist_ok=True)

    for label, argv in steps(out, args.skip_theorem):
        print(f"== {label}")
        if cli(*argv) != 0:
            print(f"FAILED: {label}")
            return 1

    history = pd.read_csv(out / "overfit_run" / "history.csv")
    if history["val_dice"].max() <= 0.95:
        print(f"FAILED: overfit run reached train dice {history['val_dice'].max():.4f}, needs > 0.95")
        return 1
    if history["train_loss"].iloc[-1] >= 0.1 * history["train_loss"].iloc[0]:
        print("FAILED: overfit run did not cut the training loss tenfold")
        return 1

    for artifact in ("history.csv", "checkpoint.iuk2"):
        if not same_bytes(out / "det_a" / artifact, out / "det_b" / artifact):
            print(f"FAILED: determinism ({artifact} differs)")
            return 1
    print("all acceptance steps passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
