"""Model / training configuration and the ablation variant table."""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

import yaml

from .types import ConfigError

BACKBONES = ("tiny-encoder", "resnet50-adapter")

ABLATION_FLAGS = (
    "use_channel_attention",
    "use_spatial_attention",
    "use_fpd_stream",
    "use_fnd_stream",
    "use_attentive_split",
)


@dataclass(frozen=True)
class ModelConfig:
    """Architecture hyperparameters.

    reduced_channels is fine-to-coarse (levels 1..4) and is scaled by
    width_multiplier (rounded, floor of 1 channel). The five boolean flags
    switch the attention blocks and the two distraction streams for ablations.
    """

    backbone: str = "tiny-encoder"
    backbone_weights: str | None = None
    reduced_channels: tuple[int, int, int, int] = (64, 128, 256, 512)
    width_multiplier: float = 0.25
    use_channel_attention: bool = True
    use_spatial_attention: bool = True
    use_fpd_stream: bool = True
    use_fnd_stream: bool = True
    use_attentive_split: bool = True

    def __post_init__(self) -> None:
        if self.backbone not in BACKBONES:
            raise ConfigError(f"unknown backbone {self.backbone!r}, expected one of {BACKBONES}")
        rc = tuple(int(c) for c in self.reduced_channels)
        if len(rc) != 4 or any(c <= 0 for c in rc):
            raise ConfigError(f"reduced_channels must be 4 positive ints, got {self.reduced_channels}")
        object.__setattr__(self, "reduced_channels", rc)
        if not (0 < self.width_multiplier <= 8):
            raise ConfigError(f"width_multiplier must be in (0, 8], got {self.width_multiplier}")

    def reduced_widths(self) -> tuple[int, int, int, int]:
        """Channel counts after applying the width multiplier."""
        return tuple(max(1, int(round(c * self.width_multiplier))) for c in self.reduced_channels)


@dataclass(frozen=True)
class TrainConfig:
    """Optimization recipe. Defaults are the desk-scale settings."""

    base_lr: float = 1e-3
    momentum: float = 0.9
    weight_decay: float = 5e-4
    poly_power: float = 0.9
    batch_size: int = 4
    epochs: int = 20
    image_size: int = 64
    seed: int = 0

    def __post_init__(self) -> None:
        if self.base_lr <= 0:
            raise ConfigError(f"base_lr must be positive, got {self.base_lr}")
        if self.batch_size <= 0 or self.epochs <= 0:
            raise ConfigError("batch_size and epochs must be positive")
        if self.image_size % 32:
            raise ConfigError(f"image_size must be divisible by 32, got {self.image_size}")
        if not (0 <= self.momentum < 1):
            raise ConfigError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.weight_decay < 0 or self.poly_power <= 0:
            raise ConfigError("weight_decay must be >= 0 and poly_power > 0")


# Ablation rows a..l mapped onto the five flags, in the order of ABLATION_FLAGS:
# (channel attention, spatial attention, fpd stream, fnd stream, attentive split).
# "base" strips both attention blocks and replaces both distraction streams
# with a skip pathway; "full" enables everything.
VARIANTS: dict[str, dict] = {
    "a": {"label": "base", "flags": (False, False, False, False, False)},
    "b": {"label": "base+channel-attention", "flags": (True, False, False, False, False)},
    "c": {"label": "base+spatial-attention", "flags": (False, True, False, False, False)},
    "d": {"label": "base+positioning", "flags": (True, True, False, False, False)},
    "e": {"label": "base+fpd", "flags": (False, False, True, False, True)},
    "f": {"label": "base+fnd", "flags": (False, False, False, True, True)},
    "g": {"label": "base+focus-no-attn", "flags": (False, False, True, True, False)},
    "h": {"label": "base+focus", "flags": (False, False, True, True, True)},
    "i": {"label": "base+positioning+fpd", "flags": (True, True, True, False, True)},
    "j": {"label": "base+positioning+fnd", "flags": (True, True, False, True, True)},
    "k": {"label": "base+positioning+focus-no-attn", "flags": (True, True, True, True, False)},
    "l": {"label": "full", "flags": (True, True, True, True, True)},
}


def variant_config(variant: str, base: ModelConfig | None = None) -> ModelConfig:
    """ModelConfig for ablation row `variant` (letter a..l)."""
    if variant not in VARIANTS:
        raise ConfigError(f"unknown ablation variant {variant!r}, expected a..l")
    base = base or ModelConfig()
    flag_values = dict(zip(ABLATION_FLAGS, VARIANTS[variant]["flags"]))
    kwargs = {f.name: getattr(base, f.name) for f in fields(base)}
    kwargs.update(flag_values)
    return ModelConfig(**kwargs)


def _from_mapping(cls, raw: dict, source: str):
    names = {f.name for f in fields(cls)}
    unknown = set(raw) - names
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)} in {source}")
    return cls(**raw)


def load_model_config(path: str | Path) -> ModelConfig:
    """Read a ModelConfig from a YAML key/value file."""
    raw = _read_yaml(path)
    if "reduced_channels" in raw:
        raw["reduced_channels"] = tuple(raw["reduced_channels"])
    return _from_mapping(ModelConfig, raw, str(path))


def load_train_config(path: str | Path) -> TrainConfig:
    """Read a TrainConfig from a YAML key/value file."""
    return _from_mapping(TrainConfig, _read_yaml(path), str(path))


def _read_yaml(path: str | Path) -> dict:
    try:
        raw = yaml.safe_load(Path(path).read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path} must be a mapping of keys to values")
    return raw
