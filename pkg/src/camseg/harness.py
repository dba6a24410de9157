"""Training, prediction, and ablation driving.

Training uses SGD with momentum and a polynomial learning-rate schedule
stepped every iteration. Weight decay skips normalization affine parameters,
biases, and the scalar residual/stream gains (every parameter with ndim <= 1).
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .config import ModelConfig, TrainConfig, variant_config
from .data import normalize_image
from .layers import upsample_to
from .losses import overall_loss
from .metrics import MetricReport, evaluate_pairs
from .model import CamoSegNet
from .types import ConfigError, TrainingDivergedError, validate_mask


def poly_lr(step: int, total_steps: int, config: TrainConfig) -> float:
    """base_lr * (1 - step / total_steps) ** poly_power; defined for 0 <= step <= total."""
    if total_steps <= 0:
        raise ValueError(f"total_steps must be positive, got {total_steps}")
    if not 0 <= step <= total_steps:
        raise ValueError(f"step {step} outside [0, {total_steps}]")
    return config.base_lr * (1.0 - step / total_steps) ** config.poly_power


def seed_everything(seed: int) -> None:
    random.seed(seed)
    np.random.seed(seed % 2 ** 32)
    torch.manual_seed(seed)


def split_decay_groups(model: torch.nn.Module) -> tuple[list, list]:
    """(decayed, undecayed) parameter lists; ndim <= 1 parameters skip decay."""
    decay, no_decay = [], []
    for p in model.parameters():
        if not p.requires_grad:
            continue
        (no_decay if p.dim() <= 1 else decay).append(p)
    return decay, no_decay


@dataclass
class TrainResult:
    model: CamoSegNet
    model_config: ModelConfig
    train_config: TrainConfig
    log: dict = field(default_factory=dict)

    @property
    def final_loss(self) -> float:
        return self.log["steps"][-1]["loss"]


def _batches(n: int, batch_size: int, order: np.ndarray):
    for start in range(0, n, batch_size):
        yield order[start:start + batch_size]


def train(model_config: ModelConfig, train_config: TrainConfig,
          dataset: list[tuple[np.ndarray, np.ndarray]]) -> TrainResult:
    """Fit a fresh model on in-memory (image, mask) pairs.

    Deterministic for a fixed seed. Raises TrainingDivergedError the moment
    the loss stops being finite.
    """
    if not dataset:
        raise ConfigError("training dataset is empty")
    seed_everything(train_config.seed)
    model = CamoSegNet(model_config)
    model.train()

    images = torch.stack([normalize_image(img) for img, _ in dataset])
    masks = torch.stack([torch.from_numpy(np.ascontiguousarray(m, dtype=np.float32)) for _, m in dataset])
    validate_mask(masks)

    decay, no_decay = split_decay_groups(model)
    optimizer = torch.optim.SGD(
        [
            {"params": decay, "weight_decay": train_config.weight_decay},
            {"params": no_decay, "weight_decay": 0.0},
        ],
        lr=train_config.base_lr,
        momentum=train_config.momentum,
    )

    n = len(dataset)
    steps_per_epoch = math.ceil(n / train_config.batch_size)
    total_steps = train_config.epochs * steps_per_epoch
    schedule = [poly_lr(t, total_steps, train_config) for t in range(total_steps + 1)]
    log = {
        "total_steps": total_steps,
        "lr_schedule": schedule,
        "steps": [],
        "epochs": [],
    }

    order_rng = np.random.default_rng(train_config.seed)
    step = 0
    for epoch in range(train_config.epochs):
        order = order_rng.permutation(n)
        epoch_losses = []
        for batch_idx in _batches(n, train_config.batch_size, order):
            lr = schedule[step]
            for group in optimizer.param_groups:
                group["lr"] = lr
            idx = torch.from_numpy(np.ascontiguousarray(batch_idx))
            pm_logits, fm_logits, _ = model(images[idx])
            loss = overall_loss(pm_logits, fm_logits[::-1], masks[idx])
            loss_value = float(loss.detach())
            if not math.isfinite(loss_value):
                raise TrainingDivergedError(
                    f"non-finite loss {loss_value} at step {step} (epoch {epoch}, lr {lr:.3g})"
                )
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            log["steps"].append({"step": step, "lr": lr, "loss": loss_value})
            step += 1
        epoch_losses = [s["loss"] for s in log["steps"][-steps_per_epoch:]]
        log["epochs"].append({"epoch": epoch, "mean_loss": float(np.mean(epoch_losses))})
    model.eval()
    return TrainResult(model=model, model_config=model_config, train_config=train_config, log=log)


@torch.no_grad()
def predict(model: CamoSegNet, image: np.ndarray, image_size: int | None = None) -> np.ndarray:
    """Probability map in [0, 1] at the input image's resolution.

    The image (3, H, W in [0, 1]) is resized to the training resolution,
    normalized, run through the network, and the map is resized back.
    """
    was_training = model.training
    model.eval()
    try:
        size = image_size or 64
        h, w = image.shape[-2:]
        x = normalize_image(np.asarray(image, dtype=np.float32))[None]
        x = upsample_to(x, (size, size))
        _, _, prob = model(x)
        out = upsample_to(prob, (h, w))[0, 0]
        return np.clip(out.numpy(), 0.0, 1.0)
    finally:
        if was_training:
            model.train()


def run_ablation(variant: str, train_config: TrainConfig,
                 train_set: list[tuple[np.ndarray, np.ndarray]],
                 eval_set: list[tuple[np.ndarray, np.ndarray]] | None = None,
                 base_config: ModelConfig | None = None) -> tuple[MetricReport, TrainResult]:
    """Train one ablation variant (a..l) and evaluate it.

    eval_set defaults to the training set. Returns (metric report, train result).
    """
    cfg = variant_config(variant, base_config)
    result = train(cfg, train_config, train_set)
    eval_set = eval_set if eval_set is not None else train_set
    pairs = []
    for i, (img, mask) in enumerate(eval_set):
        pred = predict(result.model, img, image_size=train_config.image_size)
        pairs.append((f"sample_{i:04d}", pred.astype(np.float64), mask[0].astype(np.float64)))
    return evaluate_pairs(pairs), result


def save_log(log: dict, path: str | Path) -> None:
    import json

    Path(path).write_text(json.dumps(log, indent=2) + "\n")
