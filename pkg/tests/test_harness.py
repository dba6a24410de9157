"""Training loop, schedule, prediction, ablation driver, and the CLI."""

import json

import numpy as np
import pytest
import torch

from camseg.cli import main
from camseg.config import ModelConfig, TrainConfig
from camseg.data import make_synthetic_dataset
from camseg.harness import (
    TrainResult,
    poly_lr,
    predict,
    run_ablation,
    save_log,
    split_decay_groups,
    train,
)
from camseg.model import CamoSegNet
from camseg.types import ConfigError, TrainingDivergedError


def tiny_model_config():
    # narrow widths keep the unit-test models fast
    return ModelConfig(reduced_channels=(16, 32, 64, 128))


def tiny_train_config(**kw):
    base = dict(batch_size=2, epochs=2, image_size=64, seed=0)
    base.update(kw)
    return TrainConfig(**base)


# ------------------------------------------------------------------ schedule


def test_poly_lr_endpoints_and_midpoint():
    cfg = TrainConfig(base_lr=1e-3, poly_power=0.9)
    assert poly_lr(0, 100, cfg) == 1e-3
    assert poly_lr(100, 100, cfg) == 0.0
    assert abs(poly_lr(50, 100, cfg) - 1e-3 * 0.5 ** 0.9) < 1e-12


def test_poly_lr_monotone_decreasing():
    cfg = TrainConfig()
    values = [poly_lr(t, 40, cfg) for t in range(41)]
    assert all(a > b for a, b in zip(values, values[1:]))


def test_poly_lr_domain_errors():
    cfg = TrainConfig()
    with pytest.raises(ValueError):
        poly_lr(-1, 10, cfg)
    with pytest.raises(ValueError):
        poly_lr(11, 10, cfg)
    with pytest.raises(ValueError):
        poly_lr(0, 0, cfg)


# ------------------------------------------------------------- decay groups


def test_split_decay_groups_by_dimension():
    model = CamoSegNet(tiny_model_config())
    decay, no_decay = split_decay_groups(model)
    assert all(p.dim() > 1 for p in decay)
    assert all(p.dim() <= 1 for p in no_decay)
    total = sum(p.numel() for p in decay) + sum(p.numel() for p in no_decay)
    assert total == sum(p.numel() for p in model.parameters())
    # the scalar stream gains must sit in the undecayed group
    gains = {id(model.focus1.removal.alpha), id(model.focus1.removal.beta)}
    assert gains <= {id(p) for p in no_decay}


# ------------------------------------------------------------------ training


def test_train_smoke_and_log_structure():
    data = make_synthetic_dataset(4, delta=0.8, seed=0)
    result = train(tiny_model_config(), tiny_train_config(), data)
    assert isinstance(result, TrainResult)
    log = result.log
    assert log["total_steps"] == 4  # 4 samples / batch 2 * 2 epochs
    assert len(log["lr_schedule"]) == 5  # includes the final lr at t = total
    assert [s["step"] for s in log["steps"]] == [0, 1, 2, 3]
    assert [s["lr"] for s in log["steps"]] == log["lr_schedule"][:4]
    assert len(log["epochs"]) == 2
    assert all(np.isfinite(s["loss"]) for s in log["steps"])
    assert not result.model.training  # returned in eval mode
    assert result.final_loss == log["steps"][-1]["loss"]


def test_train_is_deterministic():
    data = make_synthetic_dataset(4, delta=0.8, seed=1)
    r1 = train(tiny_model_config(), tiny_train_config(), data)
    r2 = train(tiny_model_config(), tiny_train_config(), data)
    l1 = [s["loss"] for s in r1.log["steps"]]
    l2 = [s["loss"] for s in r2.log["steps"]]
    assert l1 == l2
    for p1, p2 in zip(r1.model.parameters(), r2.model.parameters()):
        assert torch.equal(p1, p2)


def test_train_seed_changes_trajectory():
    data = make_synthetic_dataset(4, delta=0.8, seed=1)
    r1 = train(tiny_model_config(), tiny_train_config(seed=0), data)
    r2 = train(tiny_model_config(), tiny_train_config(seed=1), data)
    assert [s["loss"] for s in r1.log["steps"]] != [s["loss"] for s in r2.log["steps"]]


def test_train_rejects_empty_dataset():
    with pytest.raises(ConfigError):
        train(tiny_model_config(), tiny_train_config(), [])


def test_train_rejects_nonbinary_masks():
    data = make_synthetic_dataset(2, seed=2)
    img, mask = data[0]
    data[0] = (img, mask * 0.5)
    with pytest.raises(ConfigError):
        train(tiny_model_config(), tiny_train_config(), data)


def test_train_diverges_on_absurd_lr():
    data = make_synthetic_dataset(4, delta=0.8, seed=3)
    with pytest.raises(TrainingDivergedError):
        train(tiny_model_config(), tiny_train_config(base_lr=1e12, epochs=50), data)


def test_train_reduces_loss_on_easy_data():
    data = make_synthetic_dataset(4, delta=1.0, seed=4)
    result = train(tiny_model_config(), tiny_train_config(epochs=10, base_lr=5e-3), data)
    first = result.log["epochs"][0]["mean_loss"]
    last = result.log["epochs"][-1]["mean_loss"]
    assert last < first


# ---------------------------------------------------------------- prediction


def test_predict_shapes_and_range():
    model = CamoSegNet(tiny_model_config()).eval()
    rng = np.random.default_rng(90)
    image = rng.random((3, 50, 70)).astype(np.float32)  # odd size, not div 32
    prob = predict(model, image, image_size=64)
    assert prob.shape == (50, 70)
    assert prob.min() >= 0.0 and prob.max() <= 1.0


def test_predict_restores_training_mode():
    model = CamoSegNet(tiny_model_config())
    model.train()
    rng = np.random.default_rng(91)
    predict(model, rng.random((3, 64, 64)).astype(np.float32))
    assert model.training


def test_predict_deterministic():
    model = CamoSegNet(tiny_model_config()).eval()
    rng = np.random.default_rng(92)
    image = rng.random((3, 64, 64)).astype(np.float32)
    a = predict(model, image)
    b = predict(model, image)
    assert np.array_equal(a, b)


# ------------------------------------------------------------------ ablation


def test_run_ablation_smoke():
    data = make_synthetic_dataset(2, delta=1.0, seed=5)
    report, result = run_ablation("a", tiny_train_config(epochs=1), data,
                                  base_config=tiny_model_config())
    assert len(report.per_image) == 2
    assert set(report.mean) == {"s_alpha", "e_ad", "wf", "mae"}
    assert result.model_config.use_channel_attention is False
    assert result.log["total_steps"] == 1


def test_run_ablation_uses_eval_set_when_given():
    data = make_synthetic_dataset(2, delta=1.0, seed=6)
    eval_set = make_synthetic_dataset(3, delta=1.0, seed=60)
    report, _ = run_ablation("a", tiny_train_config(epochs=1), data, eval_set=eval_set,
                             base_config=tiny_model_config())
    assert len(report.per_image) == 3


def test_save_log_round_trip(tmp_path):
    log = {"total_steps": 2, "steps": [{"step": 0, "lr": 0.1, "loss": 1.0}]}
    path = tmp_path / "log.json"
    save_log(log, path)
    assert json.loads(path.read_text()) == log


# ----------------------------------------------------------------------- cli


def test_cli_synth_train_predict_eval_round_trip(tmp_path, capsys):
    data_dir = tmp_path / "data"
    run_dir = tmp_path / "run"
    assert main(["synth", "--n", "4", "--delta", "1.0", "--seed", "1",
                 "--out", str(data_dir)]) == 0
    assert (data_dir / "images" / "sample_0000.png").exists()
    assert (data_dir / "masks" / "sample_0003.png").exists()

    tc = tmp_path / "train.yaml"
    tc.write_text("epochs: 1\nbatch_size: 2\n")
    mc = tmp_path / "model.yaml"
    mc.write_text("reduced_channels: [16, 32, 64, 128]\n")
    assert main(["train", "--data", str(data_dir), "--out", str(run_dir),
                 "--model-config", str(mc), "--train-config", str(tc)]) == 0
    assert (run_dir / "checkpoint.pt").exists()
    log = json.loads((run_dir / "train_log.json").read_text())
    assert log["total_steps"] == 2

    pred_dir = tmp_path / "preds"
    pred_dir.mkdir()
    for i in range(4):
        name = f"sample_{i:04d}.png"
        assert main(["predict", "--ckpt", str(run_dir / "checkpoint.pt"),
                     "--input", str(data_dir / "images" / name),
                     "--output", str(pred_dir / name)]) == 0
        assert (pred_dir / name).exists()

    report_path = tmp_path / "report.json"
    assert main(["eval", "--pred-dir", str(pred_dir), "--gt-dir", str(data_dir / "masks"),
                 "--report", str(report_path), "--table"]) == 0
    report = json.loads(report_path.read_text())
    assert len(report["per_image"]) == 4
    out = capsys.readouterr().out
    assert "mae" in out and "mean" in out


def test_cli_ablate_smoke(tmp_path):
    data_dir = tmp_path / "data"
    assert main(["synth", "--n", "2", "--delta", "1.0", "--out", str(data_dir)]) == 0
    tc = tmp_path / "train.yaml"
    tc.write_text("epochs: 1\nbatch_size: 2\n")
    report_path = tmp_path / "ablate.json"
    assert main(["ablate", "--variant", "a", "--data", str(data_dir),
                 "--report", str(report_path), "--train-config", str(tc)]) == 0
    report = json.loads(report_path.read_text())
    assert len(report["per_image"]) == 2


def test_cli_rejects_unknown_command_and_variant(tmp_path):
    with pytest.raises(SystemExit):
        main(["frobnicate"])
    with pytest.raises(SystemExit):
        main(["ablate", "--variant", "zz", "--data", str(tmp_path), "--report", "r.json"])
