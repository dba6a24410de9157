"""Self-describing checkpoints: configs travel with the parameters."""

from __future__ import annotations

from dataclasses import asdict
from pathlib import Path

import torch

from .config import ModelConfig, TrainConfig
from .model import CamoSegNet
from .types import CheckpointError

CHECKPOINT_FORMAT = "camseg-checkpoint"
CHECKPOINT_VERSION = 1


def save_checkpoint(path: str | Path, model: CamoSegNet,
                    train_config: TrainConfig | None = None) -> None:
    blob = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "model_config": asdict(model.config),
        "train_config": asdict(train_config) if train_config is not None else None,
        "state_dict": model.state_dict(),
    }
    torch.save(blob, Path(path))


def load_checkpoint(path: str | Path) -> tuple[CamoSegNet, ModelConfig, TrainConfig | None]:
    """Rebuild the model a checkpoint describes. Returns it in eval mode."""
    try:
        blob = torch.load(Path(path), map_location="cpu", weights_only=True)
    except Exception as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if not isinstance(blob, dict) or blob.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"{path} is not a {CHECKPOINT_FORMAT} file")
    if blob.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"unsupported checkpoint version {blob.get('version')!r}, expected {CHECKPOINT_VERSION}"
        )
    missing = {"model_config", "state_dict"} - set(blob)
    if missing:
        raise CheckpointError(f"checkpoint {path} lacks fields {sorted(missing)}")
    try:
        raw_cfg = dict(blob["model_config"])
        raw_cfg["reduced_channels"] = tuple(raw_cfg["reduced_channels"])
        model_config = ModelConfig(**raw_cfg)
        model = CamoSegNet(model_config)
        model.load_state_dict(blob["state_dict"])
    except CheckpointError:
        raise
    except Exception as exc:
        raise CheckpointError(f"checkpoint {path} is inconsistent: {exc}") from exc
    train_config = None
    if blob.get("train_config") is not None:
        train_config = TrainConfig(**blob["train_config"])
    model.eval()
    return model, model_config, train_config
