"""Focus module: attentive split, context exploration, distraction removal.

Each focus stage runs at twice the resolution of the stage above it. The
higher-level prediction gates the current features into foreground- and
background-attentive halves; two context exploration blocks turn those into
false-positive and false-negative distraction estimates, which are subtracted
from / added to the upsampled higher-level features.
"""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F

from .layers import ConvBNReLU, upsample_to
from .types import DimensionError


def attentive_split(current: torch.Tensor, higher_pred: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
    """Gate current-level features by the upsampled higher-level prediction.

    Returns (foreground-attentive, background-attentive) features:
    A * current and (1 - A) * current with A = sigmoid(upsample(higher_pred)).
    The prediction must sit exactly one stride level above the features.
    """
    if current.dim() != 4 or higher_pred.dim() != 4 or higher_pred.shape[1] != 1:
        raise DimensionError("attentive_split expects (B, C, H, W) features and (B, 1, h, w) logits")
    h, w = current.shape[-2:]
    ph, pw = higher_pred.shape[-2:]
    if (ph * 2, pw * 2) != (h, w):
        raise DimensionError(f"prediction {ph}x{pw} is not one stride above features {h}x{w}")
    attn = torch.sigmoid(upsample_to(higher_pred, (h, w)))
    return attn * current, (1.0 - attn) * current


class ContextExplorationBlock(nn.Module):
    """Four chained branches with growing receptive fields.

    Branch i reduces the input to C//4 channels with a 3x3 conv, adds the
    previous branch's output, applies a k_i x k_i local conv and a 3x3 dilated
    conv (rates 1, 2, 4, 8). All four outputs are concatenated and fused back
    to C channels. Every conv is bias-free and followed by BN + ReLU.
    """

    KERNELS = (1, 3, 5, 7)
    DILATIONS = (1, 2, 4, 8)

    def __init__(self, channels: int):
        super().__init__()
        branch_ch = max(1, channels // 4)
        self.reduces = nn.ModuleList(ConvBNReLU(channels, branch_ch, 3) for _ in range(4))
        self.locals_ = nn.ModuleList(ConvBNReLU(branch_ch, branch_ch, k) for k in self.KERNELS)
        self.contexts = nn.ModuleList(
            ConvBNReLU(branch_ch, branch_ch, 3, dilation=r) for r in self.DILATIONS
        )
        self.fuse = ConvBNReLU(4 * branch_ch, channels, 3)

    def branch_outputs(self, x: torch.Tensor) -> list[torch.Tensor]:
        outs: list[torch.Tensor] = []
        prev = None
        for reduce, local, context in zip(self.reduces, self.locals_, self.contexts):
            t = reduce(x)
            if prev is not None:
                t = t + prev
            prev = context(local(t))
            outs.append(prev)
        return outs

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.fuse(torch.cat(self.branch_outputs(x), dim=1))


class DistractionRemoval(nn.Module):
    """Refine upsampled higher-level features by removing distractions.

    f_up = upsample(CBR(higher)); then, per enabled stream,
    x = BR(x - alpha * fpd) and x = BR(x + beta * fnd), with BR = BN + ReLU
    and alpha, beta learnable scalars initialized to 1. With both streams
    disabled the stage collapses to a single BR over f_up (skip pathway).
    """

    def __init__(self, cur_channels: int, high_channels: int,
                 use_fpd_stream: bool = True, use_fnd_stream: bool = True):
        super().__init__()
        self.use_fpd_stream = use_fpd_stream
        self.use_fnd_stream = use_fnd_stream
        self.adapt = ConvBNReLU(high_channels, cur_channels, 3)
        self.alpha = nn.Parameter(torch.ones(1)) if use_fpd_stream else None
        self.beta = nn.Parameter(torch.ones(1)) if use_fnd_stream else None
        # bn_sub doubles as the lone skip BN when both streams are off
        self.bn_sub = nn.BatchNorm2d(cur_channels) if (use_fpd_stream or not use_fnd_stream) else None
        self.bn_add = nn.BatchNorm2d(cur_channels) if use_fnd_stream else None

    def remove(self, f_up: torch.Tensor, fpd: torch.Tensor | None, fnd: torch.Tensor | None) -> torch.Tensor:
        x = f_up
        if self.use_fpd_stream:
            x = F.relu(self.bn_sub(x - self.alpha * fpd))
        if self.use_fnd_stream:
            x = F.relu(self.bn_add(x + self.beta * fnd))
        if not self.use_fpd_stream and not self.use_fnd_stream:
            x = F.relu(self.bn_sub(x))
        return x

    def forward(self, higher: torch.Tensor, fpd: torch.Tensor | None, fnd: torch.Tensor | None,
                out_size: tuple[int, int]) -> torch.Tensor:
        f_up = upsample_to(self.adapt(higher), out_size)
        return self.remove(f_up, fpd, fnd)


class FocusModule(nn.Module):
    """One refinement stage: split, explore, remove, predict.

    forward(current, higher, higher_pred) -> (features, logits), both at the
    resolution of `current`. `higher` and `higher_pred` come from the stage
    one stride level above. With use_attentive_split off, both context blocks
    see the raw current features and the prediction is only used upstream.
    """

    def __init__(self, cur_channels: int, high_channels: int,
                 use_fpd_stream: bool = True, use_fnd_stream: bool = True,
                 use_attentive_split: bool = True):
        super().__init__()
        self.use_fpd_stream = use_fpd_stream
        self.use_fnd_stream = use_fnd_stream
        self.use_attentive_split = use_attentive_split
        self.fpd_block = ContextExplorationBlock(cur_channels) if use_fpd_stream else None
        self.fnd_block = ContextExplorationBlock(cur_channels) if use_fnd_stream else None
        self.removal = DistractionRemoval(cur_channels, high_channels, use_fpd_stream, use_fnd_stream)
        self.head = nn.Conv2d(cur_channels, 1, 7, padding=3)

    def forward(self, current: torch.Tensor, higher: torch.Tensor,
                higher_pred: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        h, w = current.shape[-2:]
        hh, hw = higher.shape[-2:]
        if (hh * 2, hw * 2) != (h, w):
            raise DimensionError(f"higher features {hh}x{hw} are not one stride above current {h}x{w}")
        if tuple(higher_pred.shape[-2:]) != (hh, hw):
            raise DimensionError("higher_pred must share the higher features' resolution")
        if self.use_attentive_split:
            fg, bg = attentive_split(current, higher_pred)
        else:
            fg = bg = current
        fpd = self.fpd_block(fg) if self.fpd_block is not None else None
        fnd = self.fnd_block(bg) if self.fnd_block is not None else None
        feat = self.removal(higher, fpd, fnd, (h, w))
        return feat, self.head(feat)
