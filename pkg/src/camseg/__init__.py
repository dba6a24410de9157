"""Camouflaged object segmentation with positioning and focus refinement."""

from .checkpoint import load_checkpoint, save_checkpoint
from .config import ModelConfig, TrainConfig, VARIANTS, variant_config
from .data import SynthSpec, augment, generate_sample, load_dataset, make_synthetic_dataset
from .focus import ContextExplorationBlock, DistractionRemoval, FocusModule, attentive_split
from .harness import TrainResult, poly_lr, predict, run_ablation, train
from .losses import (LossWeights, bce_loss, boundary_weight_map, fm_loss, iou_loss,
                     overall_loss, pm_loss, weighted_bce_loss, weighted_iou_loss)
from .metrics import (MetricReport, compute_all, e_measure_adaptive, evaluate_dirs,
                      evaluate_pairs, mae, s_measure, weighted_f_measure)
from .model import CamoSegNet, parameter_count
from .positioning import ChannelAttention, PositioningModule, SpatialAttention
from .types import (CheckpointError, ConfigError, DimensionError, FeatureMap,
                    TrainingDivergedError)

__version__ = "0.1.0"

__all__ = [
    "CamoSegNet", "ChannelAttention", "CheckpointError", "ConfigError",
    "ContextExplorationBlock", "DimensionError", "DistractionRemoval", "FeatureMap",
    "FocusModule", "LossWeights", "MetricReport", "ModelConfig", "PositioningModule",
    "SpatialAttention", "SynthSpec", "TrainConfig", "TrainResult", "TrainingDivergedError",
    "VARIANTS", "attentive_split", "augment", "bce_loss", "boundary_weight_map",
    "compute_all", "e_measure_adaptive", "evaluate_dirs", "evaluate_pairs", "fm_loss",
    "generate_sample", "iou_loss", "load_checkpoint", "load_dataset",
    "make_synthetic_dataset", "mae", "overall_loss", "parameter_count", "pm_loss",
    "poly_lr", "predict", "run_ablation", "s_measure", "save_checkpoint", "train",
    "variant_config", "weighted_bce_loss", "weighted_f_measure", "weighted_iou_loss",
]
