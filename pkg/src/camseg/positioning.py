"""Positioning module: channel attention, spatial attention, initial location head.

Both attention blocks are residual: out = scale * aggregated + input, with the
scale a learnable scalar initialized to 1. Attention maps are row-stochastic,
i.e. each normalization slice sums to 1 over its last index.
"""

from __future__ import annotations

import torch
import torch.nn as nn

from .types import DimensionError


class ChannelAttention(nn.Module):
    """Non-local attention across channels.

    Query, key and value are the raw input reshaped to (C, N); there are no
    learned projections. The C x C attention map is a row softmax of Q K^T,
    computed with max-subtraction for numerical stability.
    """

    def __init__(self):
        super().__init__()
        self.gamma = nn.Parameter(torch.ones(1))

    def attention_map(self, x: torch.Tensor) -> torch.Tensor:
        """(B, C, C) row-stochastic attention over channels."""
        flat = x.flatten(2)                                   # (B, C, N)
        energy = torch.bmm(flat, flat.transpose(1, 2))        # (B, C, C)
        energy = energy - energy.max(dim=-1, keepdim=True).values
        return torch.softmax(energy, dim=-1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        flat = x.flatten(2)
        attn = self.attention_map(x)
        aggregated = torch.bmm(attn, flat).view_as(x)
        return self.gamma * aggregated + x


class SpatialAttention(nn.Module):
    """Non-local attention across positions.

    1x1 projections produce query/key at C//8 channels (floor of 1) and value
    at C channels. The N x N map row-normalizes position affinities; each output
    position is the attention-weighted sum of value vectors, scaled and added
    back to the input.
    """

    def __init__(self, channels: int):
        super().__init__()
        proj_ch = max(1, channels // 8)
        self.query = nn.Conv2d(channels, proj_ch, 1, bias=False)
        self.key = nn.Conv2d(channels, proj_ch, 1, bias=False)
        self.value = nn.Conv2d(channels, channels, 1, bias=False)
        self.gamma = nn.Parameter(torch.ones(1))

    def attention_map(self, x: torch.Tensor) -> torch.Tensor:
        """(B, N, N) row-stochastic attention over positions, N = H * W."""
        q = self.query(x).flatten(2)                          # (B, C', N)
        k = self.key(x).flatten(2)
        energy = torch.bmm(q.transpose(1, 2), k)              # (B, N, N)
        energy = energy - energy.max(dim=-1, keepdim=True).values
        return torch.softmax(energy, dim=-1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        attn = self.attention_map(x)
        v = self.value(x).flatten(2)                          # (B, C, N)
        aggregated = torch.bmm(v, attn.transpose(1, 2)).view_as(x)
        return self.gamma * aggregated + x


class PositioningModule(nn.Module):
    """Channel attention, then spatial attention, then a 7x7 location head.

    Either attention block can be switched off, in which case features pass
    through unchanged and only the head remains.
    Returns (refined features, 1-channel logits) at the input stride.
    """

    def __init__(self, channels: int, use_channel_attention: bool = True, use_spatial_attention: bool = True):
        super().__init__()
        self.channel_attention = ChannelAttention() if use_channel_attention else None
        self.spatial_attention = SpatialAttention(channels) if use_spatial_attention else None
        self.head = nn.Conv2d(channels, 1, 7, padding=3)

    def forward(self, x: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        if x.dim() != 4:
            raise DimensionError(f"expected (B, C, H, W) features, got {tuple(x.shape)}")
        feat = x
        if self.channel_attention is not None:
            feat = self.channel_attention(feat)
        if self.spatial_attention is not None:
            feat = self.spatial_attention(feat)
        return feat, self.head(feat)
