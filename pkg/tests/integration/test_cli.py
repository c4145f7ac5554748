import json
from pathlib import Path

import numpy as np
import pandas as pd
import pytest
from PIL import Image

from src.cli.main import main
from src.training import CHECKPOINT_NAME, HISTORY_NAME, load_checkpoint

TINY_CONFIG = Path(__file__).resolve().parents[2] / "config" / "tiny.yaml"


@pytest.fixture(scope="module")
def run(tmp_path_factory):
    """A synthetic dataset plus a one-epoch tiny checkpoint trained on it."""
    root = tmp_path_factory.mktemp("cli")
    with pytest.MonkeyPatch.context() as mp:
        # keep a developer's .env out of the run
        mp.chdir(root)
        data, out = root / "data", root / "run"
        assert main(["synth", "--out", str(data), "--size", "16x16", "--n-train", "4", "--n-val", "2", "--n-test", "2"]) == 0
        assert main(["train", "--config", str(TINY_CONFIG), "--data", str(data), "--out", str(out), "--epochs", "1"]) == 0
        yield {"root": root, "data": data, "ckpt": out / CHECKPOINT_NAME, "out": out}


@pytest.fixture(autouse=True)
def isolated_cwd(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)


def test_synth_writes_split_files(run):
    data = run["data"]
    assert len(list((data / "images").glob("*.png"))) == 8
    assert len(list((data / "masks").glob("*.png"))) == 8
    assert len((data / "val.txt").read_text().split()) == 2


def test_train_writes_history_and_checkpoint(run):
    history = pd.read_csv(run["out"] / HISTORY_NAME)
    assert list(history["epoch"]) == [1]
    assert run["ckpt"].is_file()


def test_eval(run, tmp_path):
    out = tmp_path / "eval"
    assert main(["eval", "--ckpt", str(run["ckpt"]), "--data", str(run["data"]), "--out", str(out)]) == 0
    frame = pd.read_csv(out / "metrics.csv")
    assert len(frame) == 2
    summary = json.loads((out / "metrics.json").read_text())
    assert summary["n_images"] == 2
    assert 0.0 <= summary["dice"] <= 1.0


def test_eval_reproduces_best_validation_dice(run, tmp_path):
    out = tmp_path / "eval"
    assert main(["eval", "--ckpt", str(run["ckpt"]), "--data", str(run["data"]), "--out", str(out)]) == 0
    _, meta = load_checkpoint(run["ckpt"])
    summary = json.loads((out / "metrics.json").read_text())
    assert summary["dice"] == pytest.approx(meta.best_metric, abs=1e-6)


def test_noise_free_sweep_matches_eval(run, tmp_path):
    ckpt, data = str(run["ckpt"]), str(run["data"])
    assert main(["eval", "--ckpt", ckpt, "--data", data, "--split", "val", "--out", str(tmp_path / "eval")]) == 0
    argv = ["ablate-noise", "--ckpt", ckpt, "--data", data, "--split", "val", "--levels", "0"]
    assert main(argv + ["--out", str(tmp_path / "noise")]) == 0
    frame = pd.read_csv(tmp_path / "noise" / "noise.csv")
    summary = json.loads((tmp_path / "eval" / "metrics.json").read_text())
    assert list(frame["level"]) == [0.0]
    assert frame["dice"].iloc[0] == pytest.approx(summary["dice"], abs=1e-9)


def test_repeated_runs_write_identical_csvs(run, tmp_path):
    ckpt, data = str(run["ckpt"]), str(run["data"])
    for name in ("a", "b"):
        assert main(["eval", "--ckpt", ckpt, "--data", data, "--out", str(tmp_path / name / "eval")]) == 0
        argv = ["ablate-noise", "--ckpt", ckpt, "--data", data, "--split", "test", "--out", str(tmp_path / name / "noise")]
        assert main(argv) in (0, 1)
    for csv in ("eval/metrics.csv", "noise/noise.csv"):
        assert (tmp_path / "a" / csv).read_bytes() == (tmp_path / "b" / csv).read_bytes()


def test_eval_with_empty_val_file(tmp_path):
    data, out = tmp_path / "data", tmp_path / "run"
    assert main(["synth", "--out", str(data), "--size", "16x16", "--n-train", "3", "--n-val", "0"]) == 0
    assert (data / "val.txt").read_text() == ""
    assert main(["train", "--config", str(TINY_CONFIG), "--data", str(data), "--out", str(out), "--epochs", "1"]) == 0
    assert main(["eval", "--ckpt", str(out / CHECKPOINT_NAME), "--data", str(data), "--out", str(tmp_path / "eval")]) == 0
    summary = json.loads((tmp_path / "eval" / "metrics.json").read_text())
    assert summary["n_images"] == 3


def test_predict_with_overlays(run, tmp_path):
    out = tmp_path / "pred"
    assert main(["predict", "--ckpt", str(run["ckpt"]), "--data", str(run["data"]), "--out", str(out), "--overlay"]) == 0
    masks = sorted((out / "masks").glob("*.png"))
    assert len(masks) == 8
    values = np.asarray(Image.open(masks[0]))
    assert values.shape == (16, 16)
    assert set(np.unique(values)) <= {0, 255}
    assert np.asarray(Image.open(out / "overlays" / masks[0].name)).shape == (16, 16, 3)


def test_ablate_noise(run, tmp_path):
    out = tmp_path / "noise"
    code = main(
        ["ablate-noise", "--ckpt", str(run["ckpt"]), "--data", str(run["data"]), "--split", "test", "--out", str(out)]
    )
    assert code in (0, 1)
    frame = pd.read_csv(out / "noise.csv")
    assert list(frame["level"]) == [0.0, 0.2, 0.4]


def test_dump_edges(run, tmp_path):
    out = tmp_path / "edges"
    assert main(["dump-edges", "--ckpt", str(run["ckpt"]), "--out", str(out), "--samples", "5", "--max-edges", "2"]) == 0
    frame = pd.read_csv(out / "edges.csv")
    assert list(frame.columns) == ["block", "layer", "out", "in", "x", "phi"]
    assert len(frame) % 5 == 0 and len(frame) > 0


def test_verify_selected_check(tmp_path):
    assert main(["verify", "--check", "degeneracy,memory", "--out", str(tmp_path)]) == 0
    summary = json.loads((tmp_path / "verify.json").read_text())
    assert [c["name"] for c in summary["checks"]] == ["degeneracy", "memory"]
    assert summary["passed"] is True


def test_verify_rk4_order(tmp_path):
    assert main(["verify", "--check", "rk4", "--out", str(tmp_path)]) == 0
    check = json.loads((tmp_path / "verify.json").read_text())["checks"][0]
    assert check["name"] == "rk4"
    assert 3.7 <= check["metrics"]["slope"] <= 4.3


def test_synth_seed_comes_from_config(tmp_path):
    for name, extra in (("flag", ["--seed", "5"]), ("set", ["--set", "train.seed=5"]), ("default", [])):
        assert main(["synth", "--out", str(tmp_path / name), "--size", "16x16", "--n-train", "1"] + extra) == 0
    image = {name: (tmp_path / name / "images" / "synth_0000.png").read_bytes() for name in ("flag", "set", "default")}
    assert image["set"] == image["flag"]
    assert image["default"] != image["flag"]


def test_gradcheck_module(tmp_path):
    assert main(["gradcheck", "--module", "kan", "--out", str(tmp_path)]) == 0
    frame = pd.read_csv(tmp_path / "gradcheck.csv")
    assert set(frame["module"]) == {"kan"}
    assert frame["passed"].all()


@pytest.mark.parametrize(
    "argv",
    [
        ["train", "--out", "run"],
        ["eval", "--ckpt", "missing.iuk2", "--data", ".", "--out", "e"],
        ["verify", "--check", "nope", "--out", "v"],
        ["gradcheck", "--set", "train.nope=1"],
        ["synth", "--out", "d", "--size", "sixteen"],
    ],
)
def test_user_errors_exit_two(argv):
    assert main(argv) == 2


def test_set_overrides_config_file(run, tmp_path):
    out = tmp_path / "run"
    argv = ["train", "--config", str(TINY_CONFIG), "--data", str(run["data"]), "--out", str(out), "--epochs", "1"]
    argv += ["--set", "model.integration.steps=1", "--seed", "3"]
    assert main(argv) == 0
    _, meta = load_checkpoint(out / CHECKPOINT_NAME)
    assert meta.model_cfg.integration.steps == 1
    assert meta.seed == 3
