import json

import numpy as np
import pytest

from wxdepth.cli import main
from wxdepth.synthdata import load_dataset
from wxdepth.trainer import TrainConfig


def test_synth_and_augment_commands(tmp_path, capsys):
    root = tmp_path / "data"
    assert main(["synth", "--scenes", "2", "--seed", "3", "--out", str(root), "--width", "64", "--height", "32"]) == 0
    dataset = load_dataset(root)
    assert len(dataset) == 2
    assert dataset.variants == ["clear_0"]

    assert main([
        "augment", "--data", str(root), "--weathers", "fog,rain", "--magnitudes", "1,2",
        "--seed", "1", "--visibility-m1", "150", "--visibility-m2", "75",
    ]) == 0
    dataset = load_dataset(root)
    assert set(dataset.variants) == {"clear_0", "fog_1", "fog_2", "rain_1", "rain_2"}


def test_train_and_eval_commands(tiny_dataset, tmp_path, capsys):
    config = TrainConfig(
        dataset_root=str(tiny_dataset),
        out_dir=str(tmp_path / "run"),
        epochs=2,
        batch_size=2,
        base_channels=4,
        threshold=1e9,
        seed=0,
    )
    config_path = tmp_path / "config.json"
    config.to_json(config_path)
    assert main(["train", "--config", str(config_path)]) == 0
    checkpoint = tmp_path / "run" / "checkpoints" / "last.pt"
    assert checkpoint.exists()
    assert (tmp_path / "run" / "train_log.jsonl").exists()

    report = tmp_path / "report.json"
    assert main([
        "eval", "--checkpoint", str(checkpoint), "--dataset", str(tiny_dataset),
        "--variants", "clear_0,fog_1,snow_2", "--out", str(report),
    ]) == 0
    payload = json.loads(report.read_text())
    assert set(payload) == {"clear_0", "fog_1", "snow_2", "average"}
    out = capsys.readouterr().out
    assert "absrel" in out


def test_train_resume_flag(tiny_dataset, tmp_path):
    config = TrainConfig(
        dataset_root=str(tiny_dataset),
        out_dir=str(tmp_path / "run"),
        epochs=2,
        batch_size=2,
        base_channels=4,
        threshold=1e9,
        seed=0,
    )
    config_path = tmp_path / "config.json"
    config.to_json(config_path)
    assert main(["train", "--config", str(config_path)]) == 0
    longer = TrainConfig(**{**json.loads(config_path.read_text()), "epochs": 3})
    longer.to_json(config_path)
    resume_point = tmp_path / "run" / "checkpoints" / "epoch_0001.pt"
    assert main(["train", "--config", str(config_path), "--resume", str(resume_point)]) == 0
    lines = (tmp_path / "run" / "train_log.jsonl").read_text().splitlines()
    epochs = [json.loads(line)["epoch"] for line in lines]
    assert epochs == [0, 1, 2]


def test_eval_reports_absent_variant(clear_only_dataset, tmp_path, capsys):
    import torch
    from wxdepth.model import DepthNetwork, ModelConfig, save_checkpoint

    torch.manual_seed(0)
    dataset = load_dataset(clear_only_dataset)
    net = DepthNetwork(ModelConfig(dataset.rig.width, dataset.rig.height, base_channels=4))
    checkpoint = save_checkpoint(tmp_path / "ck.pt", net)
    report = tmp_path / "report.json"
    assert main([
        "eval", "--checkpoint", str(checkpoint), "--dataset", str(clear_only_dataset),
        "--variants", "clear_0,rain_1", "--out", str(report),
    ]) == 0
    payload = json.loads(report.read_text())
    assert payload["rain_1"] is None
    assert "absent" in capsys.readouterr().out
