"""Feature encoders producing a 4-level pyramid at strides 4, 8, 16, 32."""

from __future__ import annotations

import torch
import torch.nn as nn

from .config import ModelConfig
from .layers import ConvBNReLU
from .types import ConfigError


class TinyEncoder(nn.Module):
    """Small conv encoder for desk-scale runs. Channels default to 16/32/64/128."""

    def __init__(self, channels: tuple[int, int, int, int] = (16, 32, 64, 128)):
        super().__init__()
        self.channels = tuple(channels)
        c1, c2, c3, c4 = self.channels
        # Every stage halves resolution twice (stage 1) or once (stages 2..4),
        # landing the levels exactly on strides 4, 8, 16, 32.
        self.stage1 = nn.Sequential(ConvBNReLU(3, c1, stride=2), ConvBNReLU(c1, c1, stride=2))
        self.stage2 = nn.Sequential(ConvBNReLU(c1, c2, stride=2), ConvBNReLU(c2, c2))
        self.stage3 = nn.Sequential(ConvBNReLU(c2, c3, stride=2), ConvBNReLU(c3, c3))
        self.stage4 = nn.Sequential(ConvBNReLU(c3, c4, stride=2), ConvBNReLU(c4, c4))

    def forward(self, x: torch.Tensor) -> list[torch.Tensor]:
        f1 = self.stage1(x)
        f2 = self.stage2(f1)
        f3 = self.stage3(f2)
        f4 = self.stage4(f3)
        return [f1, f2, f3, f4]


class ResNet50Adapter(nn.Module):
    """4-level pyramid off a torchvision ResNet-50 trunk.

    Weights are loaded from a local state-dict file when one is supplied;
    otherwise the trunk starts from random init (no download is attempted).
    """

    def __init__(self, weights_file: str | None = None):
        super().__init__()
        from torchvision.models import resnet50

        net = resnet50(weights=None)
        if weights_file is not None:
            try:
                state = torch.load(weights_file, map_location="cpu", weights_only=True)
            except Exception as exc:
                raise ConfigError(f"cannot load backbone weights from {weights_file}: {exc}") from exc
            net.load_state_dict(state)
        self.channels = (256, 512, 1024, 2048)
        self.stem = nn.Sequential(net.conv1, net.bn1, net.relu, net.maxpool)
        self.layer1 = net.layer1
        self.layer2 = net.layer2
        self.layer3 = net.layer3
        self.layer4 = net.layer4

    def forward(self, x: torch.Tensor) -> list[torch.Tensor]:
        f1 = self.layer1(self.stem(x))
        f2 = self.layer2(f1)
        f3 = self.layer3(f2)
        f4 = self.layer4(f3)
        return [f1, f2, f3, f4]


def build_backbone(config: ModelConfig) -> nn.Module:
    if config.backbone == "tiny-encoder":
        return TinyEncoder()
    if config.backbone == "resnet50-adapter":
        return ResNet50Adapter(config.backbone_weights)
    raise ConfigError(f"unknown backbone {config.backbone!r}")
