"""Domain types and error taxonomy shared across the package."""

from __future__ import annotations

from dataclasses import dataclass

import torch


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


class DimensionError(ValueError):
    """Tensor shape violates a documented contract (e.g. input not divisible by 32)."""


class CheckpointError(RuntimeError):
    """Checkpoint file is missing fields, has a wrong version, or cannot be read."""


class TrainingDivergedError(RuntimeError):
    """Training loss became non-finite."""


@dataclass(frozen=True)
class FeatureMap:
    """A backbone or reduced feature tensor tagged with its pyramid position.

    data:   (B, C, H, W) tensor
    level:  1..4, fine to coarse
    stride: spatial stride relative to the network input (4, 8, 16 or 32)
    """

    data: torch.Tensor
    level: int
    stride: int

    def __post_init__(self) -> None:
        if self.data.dim() != 4:
            raise DimensionError(f"feature data must be 4D, got {tuple(self.data.shape)}")
        if self.level not in (1, 2, 3, 4):
            raise ConfigError(f"feature level must be in 1..4, got {self.level}")
        if self.stride != 2 ** (self.level + 1):
            raise ConfigError(f"level {self.level} implies stride {2 ** (self.level + 1)}, got {self.stride}")


def validate_image(image: torch.Tensor) -> None:
    """Check a (B, 3, H, W) input batch with H and W divisible by 32."""
    if image.dim() != 4 or image.shape[1] != 3:
        raise DimensionError(f"expected (B, 3, H, W) image batch, got {tuple(image.shape)}")
    h, w = image.shape[-2:]
    if h % 32 or w % 32:
        raise DimensionError(f"image height and width must be divisible by 32, got {h}x{w}")


def validate_mask(mask: torch.Tensor) -> None:
    """Check a (B, 1, H, W) strictly binary mask batch."""
    if mask.dim() != 4 or mask.shape[1] != 1:
        raise DimensionError(f"expected (B, 1, H, W) mask batch, got {tuple(mask.shape)}")
    bad = ((mask != 0) & (mask != 1)).any()
    if bool(bad):
        raise ConfigError("mask values must be exactly 0 or 1")
