from .config import (
    ARCHS,
    ModelConfig,
    ModelGraph,
    count_parameters,
    layer_summary,
)
from .fpn import FPNSegmenter, SmallPyramidEncoder, build_fpn
from .unet_attention import AttentionGate, AttentionUNet, build_unet_attention

_BUILDERS = {"fpn": build_fpn, "unet_attn": build_unet_attention}


def build_model(config: ModelConfig, seed=None) -> ModelGraph:
    """Dispatch to the architecture-specific builder."""
    return _BUILDERS[config.arch](config, seed=seed)


__all__ = [
    "ARCHS",
    "ModelConfig",
    "ModelGraph",
    "count_parameters",
    "layer_summary",
    "FPNSegmenter",
    "SmallPyramidEncoder",
    "build_fpn",
    "AttentionGate",
    "AttentionUNet",
    "build_unet_attention",
    "build_model",
]
