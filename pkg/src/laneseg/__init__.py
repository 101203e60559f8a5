"""Lane segmentation toolkit.

Two segmentation models (a feature-pyramid network predicting background/
left-lane/right-lane classes and an attention-gated U-Net predicting a binary
lane mask), the preprocessing and augmentation pipeline feeding them, dice and
cross-entropy losses, a deterministic training loop, pixel- and frame-level
evaluation, and a synthetic road-scene generator for self-contained runs.
"""

from .data import (
    AugmentationSpec,
    DatasetManifest,
    ManifestEntry,
    Sample,
    Transform,
    augment,
    extract_frames,
    load_manifest,
    resize_pair,
    save_manifest,
    split_union_mask,
    to_rgb_normalized,
)
from .losses import LossValue, bce_loss, binary_dice_loss, multi_dice_loss
from .metrics import (
    ConfusionMatrix,
    FrameLevelReport,
    MetricReport,
    binarize,
    confusion,
    foreground_iou,
    frame_lane_accuracy,
    pixel_metrics,
)
from .models import (
    AttentionGate,
    ModelConfig,
    ModelGraph,
    build_fpn,
    build_model,
    build_unet_attention,
    count_parameters,
    layer_summary,
)
from .synth import LaneGeometry, SceneParams, generate_dataset, generate_scene
from .train import CheckpointBundle, TrainConfig, load_checkpoint, save_checkpoint, train

__version__ = "0.1.0"

__all__ = [
    "AugmentationSpec",
    "DatasetManifest",
    "ManifestEntry",
    "Sample",
    "Transform",
    "augment",
    "extract_frames",
    "load_manifest",
    "resize_pair",
    "save_manifest",
    "split_union_mask",
    "to_rgb_normalized",
    "LossValue",
    "bce_loss",
    "binary_dice_loss",
    "multi_dice_loss",
    "ConfusionMatrix",
    "FrameLevelReport",
    "MetricReport",
    "binarize",
    "confusion",
    "foreground_iou",
    "frame_lane_accuracy",
    "pixel_metrics",
    "AttentionGate",
    "ModelConfig",
    "ModelGraph",
    "build_fpn",
    "build_model",
    "build_unet_attention",
    "count_parameters",
    "layer_summary",
    "LaneGeometry",
    "SceneParams",
    "generate_dataset",
    "generate_scene",
    "CheckpointBundle",
    "TrainConfig",
    "load_checkpoint",
    "save_checkpoint",
    "train",
    "__version__",
]
