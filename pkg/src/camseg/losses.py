"""Supervision: BCE + IoU for the location map, boundary-weighted variants for
the refinement maps, and the weighted multi-level total.

All losses take raw logits and binary masks of identical shape (B, 1, H, W)
and return non-negative scalars. IoU terms are computed per image and averaged
over the batch; the +1 smoothing keeps them finite on empty masks.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn.functional as F

from .layers import upsample_to
from .types import DimensionError

IOU_SMOOTHING = 1.0


@dataclass(frozen=True)
class LossWeights:
    """Per-level weights for the total loss; fm_weights run fine to coarse."""

    pm_weight: float = 1.0
    fm_weights: tuple[float, float, float] = (4.0, 2.0, 1.0)

    def __post_init__(self):
        if len(self.fm_weights) != 3:
            raise ValueError(f"fm_weights needs 3 entries, got {len(self.fm_weights)}")


def _check_pair(logits: torch.Tensor, gt: torch.Tensor) -> None:
    if logits.shape != gt.shape:
        raise DimensionError(f"logits {tuple(logits.shape)} and gt {tuple(gt.shape)} must match")
    if logits.dim() != 4 or logits.shape[1] != 1:
        raise DimensionError(f"expected (B, 1, H, W), got {tuple(logits.shape)}")


def boundary_weight_map(gt: torch.Tensor) -> torch.Tensor:
    """1 + 5 * |meanpool31(gt) - gt|: emphasizes pixels near mask boundaries.

    Bounded in [1, 6]; identically 1 for a constant-zero mask.
    """
    return 1.0 + 5.0 * torch.abs(F.avg_pool2d(gt, kernel_size=31, stride=1, padding=15) - gt)


def bce_loss(logits: torch.Tensor, gt: torch.Tensor) -> torch.Tensor:
    """Mean binary cross-entropy over all pixels."""
    _check_pair(logits, gt)
    return F.binary_cross_entropy_with_logits(logits, gt)


def iou_loss(logits: torch.Tensor, gt: torch.Tensor) -> torch.Tensor:
    """1 - (intersection + 1) / (union + 1), per image, averaged over the batch."""
    _check_pair(logits, gt)
    p = torch.sigmoid(logits)
    inter = (p * gt).sum(dim=(1, 2, 3))
    union = (p + gt - p * gt).sum(dim=(1, 2, 3))
    return (1.0 - (inter + IOU_SMOOTHING) / (union + IOU_SMOOTHING)).mean()


def weighted_bce_loss(logits: torch.Tensor, gt: torch.Tensor) -> torch.Tensor:
    """Boundary-weighted BCE; reduces to bce_loss when the weight map is 1."""
    _check_pair(logits, gt)
    w = boundary_weight_map(gt)
    raw = F.binary_cross_entropy_with_logits(logits, gt, reduction="none")
    return ((w * raw).sum(dim=(1, 2, 3)) / w.sum(dim=(1, 2, 3))).mean()


def weighted_iou_loss(logits: torch.Tensor, gt: torch.Tensor) -> torch.Tensor:
    """Boundary-weighted IoU; reduces to iou_loss when the weight map is 1."""
    _check_pair(logits, gt)
    w = boundary_weight_map(gt)
    p = torch.sigmoid(logits)
    inter = (w * p * gt).sum(dim=(1, 2, 3))
    union = (w * (p + gt)).sum(dim=(1, 2, 3)) - inter
    return (1.0 - (inter + IOU_SMOOTHING) / (union + IOU_SMOOTHING)).mean()


def pm_loss(logits: torch.Tensor, gt: torch.Tensor) -> torch.Tensor:
    """Location-map loss: plain BCE + IoU."""
    return bce_loss(logits, gt) + iou_loss(logits, gt)


def fm_loss(logits: torch.Tensor, gt: torch.Tensor) -> torch.Tensor:
    """Refinement-map loss: boundary-weighted BCE + boundary-weighted IoU."""
    return weighted_bce_loss(logits, gt) + weighted_iou_loss(logits, gt)


def overall_loss(pm_logits: torch.Tensor, fm_logits: list[torch.Tensor] | tuple[torch.Tensor, ...],
                 gt: torch.Tensor, weights: LossWeights = LossWeights()) -> torch.Tensor:
    """Total loss over all four prediction maps.

    fm_logits must hold exactly 3 maps ordered fine to coarse; every map is
    bilinearly upsampled to the ground-truth resolution before its loss.
    """
    if len(fm_logits) != 3:
        raise DimensionError(f"expected 3 refinement logit maps, got {len(fm_logits)}")
    size = gt.shape[-2:]
    total = weights.pm_weight * pm_loss(upsample_to(pm_logits, size), gt)
    for w, logits in zip(weights.fm_weights, fm_logits):
        total = total + w * fm_loss(upsample_to(logits, size), gt)
    return total
