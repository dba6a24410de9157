"""Full segmentation network: backbone, channel reduction, positioning, focus cascade."""

from __future__ import annotations

import torch
import torch.nn as nn

from .backbones import build_backbone
from .config import ModelConfig
from .focus import FocusModule
from .layers import ConvBNReLU, upsample_to
from .positioning import PositioningModule
from .types import FeatureMap, validate_image


class CamoSegNet(nn.Module):
    """Locate-then-refine camouflaged object segmentation.

    The positioning module predicts an initial map on the coarsest reduced
    features; three focus modules refine it level by level down to stride 4.

    forward(image) returns
      pm_logits:  (B, 1, H/32, W/32)
      fm_logits:  [stride 16, stride 8, stride 4] logits, coarse to fine
      final_prob: (B, 1, H, W) sigmoid of the finest logits, upsampled
    """

    def __init__(self, config: ModelConfig | None = None):
        super().__init__()
        self.config = config or ModelConfig()
        self.backbone = build_backbone(self.config)
        widths = self.config.reduced_widths()
        self.reducers = nn.ModuleList(
            ConvBNReLU(bc, w, 3) for bc, w in zip(self.backbone.channels, widths)
        )
        self.positioning = PositioningModule(
            widths[3],
            use_channel_attention=self.config.use_channel_attention,
            use_spatial_attention=self.config.use_spatial_attention,
        )
        fm_args = dict(
            use_fpd_stream=self.config.use_fpd_stream,
            use_fnd_stream=self.config.use_fnd_stream,
            use_attentive_split=self.config.use_attentive_split,
        )
        self.focus3 = FocusModule(widths[2], widths[3], **fm_args)
        self.focus2 = FocusModule(widths[1], widths[2], **fm_args)
        self.focus1 = FocusModule(widths[0], widths[1], **fm_args)

    def extract_features(self, image: torch.Tensor) -> list[FeatureMap]:
        """Backbone pyramid as FeatureMaps at strides 4, 8, 16, 32."""
        validate_image(image)
        raw = self.backbone(image)
        return [FeatureMap(f, level=i + 1, stride=2 ** (i + 2)) for i, f in enumerate(raw)]

    def reduce(self, feature: FeatureMap) -> FeatureMap:
        """Apply the per-level channel reduction conv."""
        reduced = self.reducers[feature.level - 1](feature.data)
        return FeatureMap(reduced, level=feature.level, stride=feature.stride)

    def forward(self, image: torch.Tensor) -> tuple[torch.Tensor, list[torch.Tensor], torch.Tensor]:
        feats = self.extract_features(image)
        r1, r2, r3, r4 = (self.reduce(f).data for f in feats)
        pm_feat, pm_logits = self.positioning(r4)
        f3, l3 = self.focus3(r3, pm_feat, pm_logits)
        f2, l2 = self.focus2(r2, f3, l3)
        _, l1 = self.focus1(r1, f2, l2)
        final_prob = torch.sigmoid(upsample_to(l1, image.shape[-2:]))
        return pm_logits, [l3, l2, l1], final_prob


def parameter_count(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters())
