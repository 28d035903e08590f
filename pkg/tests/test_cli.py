"""The sfn-vqa command line, end to end on the tiny dataset."""

import pandas as pd
import pytest
import yaml

from sfn_vqa.config import get_config
from sfn_vqa.data.synthetic import generate_synthetic
from sfn_vqa.main import run
from tests.conftest import SMALL_MODEL


def small_flags(*extra):
    flags = []
    for expression in [*SMALL_MODEL, *extra]:
        flags += ["--set", expression]
    return flags


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    for name in ("SFN_LOG_LEVEL", "SFN_TELEMETRY", "SFN_THREADS"):
        monkeypatch.delenv(name, raising=False)


def test_usage_errors_exit_with_two(tmp_path):
    assert run([]) == 2
    assert run(["bogus"]) == 2
    assert run(["analyze", "--data", str(tmp_path)]) == 2
    assert run(["analyze", "--data", str(tmp_path), "--out", str(tmp_path), "--log-level", "loud"]) == 2


def test_configuration_errors_exit_with_one(tmp_path, capsys):
    code = run(["analyze", "--data", str(tmp_path), "--out", str(tmp_path / "out"), "--set", "training.dropout=2"])
    assert code == 1
    assert "Configuration Error" in capsys.readouterr().err


GENERATE_FLAGS = [
    "--seed", "3",
    "--set", "synthetic.n_images=30", "--set", "synthetic.valid_fraction=0.0", "--set", "synthetic.test_images=1",
]


def tree_bytes(root):
    return {path.relative_to(root).as_posix(): path.read_bytes() for path in sorted(root.rglob("*")) if path.is_file()}


def test_generate_synthetic(tmp_path, capsys):
    out = tmp_path / "data"
    assert run(["generate-synthetic", "--out", str(out), *GENERATE_FLAGS]) == 0
    assert "train: 30 images" in capsys.readouterr().out
    assert len(list((out / "train" / "images").glob("*.png"))) == 30
    assert not (out / "run.log").exists()
    assert not (out / "config.yaml").exists()

    spec = get_config(
        overrides=["synthetic.n_images=30", "synthetic.valid_fraction=0.0", "synthetic.test_images=1", "synthetic.seed=3"],
        use_environment=False,
    ).synthetic
    direct = tmp_path / "direct"
    generate_synthetic(spec, direct)
    assert tree_bytes(out) == tree_bytes(direct)


def test_generate_synthetic_twice_gives_identical_trees(tmp_path):
    first, second = tmp_path / "a", tmp_path / "b"
    assert run(["generate-synthetic", "--out", str(first), *GENERATE_FLAGS]) == 0
    assert run(["generate-synthetic", "--out", str(second), *GENERATE_FLAGS]) == 0
    assert tree_bytes(first) == tree_bytes(second)


def test_analyze(tiny_dataset, tmp_path, capsys):
    out = tmp_path / "report"
    assert run(["analyze", "--data", str(tiny_dataset), "--out", str(out), "--set", "analysis.plots=false"]) == 0
    assert "report files" in capsys.readouterr().out
    assert (out / "class_stats.csv").exists()
    assert (out / "unseen_C1.csv").exists()
    assert (out / "config.yaml").exists()
    assert (out / "run.log").exists()
    assert not list(out.glob("*.png"))


def test_missing_dataset_is_an_error(tmp_path, capsys):
    assert run(["analyze", "--data", str(tmp_path / "nowhere"), "--out", str(tmp_path / "out")]) == 1
    assert "Error:" in capsys.readouterr().err


def test_train_sfn_needs_the_categorizer(tiny_dataset, tmp_path, capsys):
    code = run(["train", "--stage", "sfn", "--data", str(tiny_dataset), "--out", str(tmp_path / "sfn")])
    assert code == 1
    assert "categorizer" in capsys.readouterr().err


def test_full_pipeline(tiny_dataset, tmp_path, capsys):
    data = tmp_path / "resampled"
    categorizer, fusion, sfn = tmp_path / "categorizer", tmp_path / "fusion", tmp_path / "sfn"
    report, predictions = tmp_path / "report", tmp_path / "predictions"

    assert run(["resample", "--data", str(tiny_dataset), "--out", str(data), "--seed", "4"]) == 0
    layout = yaml.safe_load((data / "data.yaml").read_text(encoding="utf-8"))["splits"]
    assert set(layout) == {"train", "valid", "test"}
    assert not (data / "run.log").exists()

    common = ["--data", str(data), *small_flags()]
    assert run(["pretrain-categorizer", "--out", str(categorizer), *common]) == 0
    assert run(["pretrain-fusion", "--out", str(fusion), *common]) == 0
    assert run([
        "train", "--stage", "sfn", "--out", str(sfn), "--categorizer", str(categorizer), "--fusion", str(fusion), *common,
    ]) == 0
    for name in ("manifest.json", "params.bin", "vocab.json", "answers.json", "training_log.csv"):
        assert (sfn / name).exists()

    assert run(["evaluate", "--checkpoint", str(sfn), "--split", "valid", "--out", str(report), *common]) == 0
    metrics = pd.read_csv(report / "metrics.csv")
    assert metrics.loc[0, "category"] == "all"
    assert (report / "examples_valid.txt").exists()

    capsys.readouterr()
    assert run(["predict", "--checkpoint", str(sfn), "--out", str(predictions), *common]) == 0
    lines = (predictions / "predictions.txt").read_text(encoding="utf-8").splitlines()
    test_lines = sum(
        len(path.read_text(encoding="utf-8").splitlines()) for path in (tiny_dataset / "test").glob("C?_test.txt")
    )
    assert len(lines) == test_lines
    assert all(line.startswith("synth") and line.count("|") == 1 for line in lines)
