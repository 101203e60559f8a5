"""Feature-pyramid segmentation model predicting background/left/right classes.

The encoder exposes feature maps at strides {4, 8, 16, 32}. 1x1 lateral convs
project them to a common pyramid width, a top-down pathway adds 2x-upsampled
coarser levels, and a per-level 3x3 head maps each level to the head width.
All levels are upsampled to stride 4, summed, classified by a 1x1 conv, and
upsampled 4x back to the input resolution with a per-pixel softmax over the
three classes.
"""

from __future__ import annotations

import torch
import torch.nn.functional as F
from torch import nn

from .config import ModelConfig, ModelGraph, count_parameters


class SmallPyramidEncoder(nn.Module):
    """Random-initialized encoder with the stride-{4,8,16,32} signature."""

    channels = (32, 64, 128, 256)

    def __init__(self, in_channels=3):
        super().__init__()
        self.stem = nn.Sequential(
            nn.Conv2d(in_channels, 16, 3, stride=2, padding=1), nn.ReLU(inplace=True)
        )
        widths = (16,) + self.channels
        self.stages = nn.ModuleList(
            nn.Sequential(
                nn.Conv2d(widths[i], widths[i + 1], 3, stride=2, padding=1),
                nn.ReLU(inplace=True),
                nn.Conv2d(widths[i + 1], widths[i + 1], 3, padding=1),
                nn.ReLU(inplace=True),
            )
            for i in range(4)
        )

    def forward(self, x):
        x = self.stem(x)
        feats = []
        for stage in self.stages:
            x = stage(x)
            feats.append(x)
        return feats


class EfficientNetB0Encoder(nn.Module):
    """ImageNet-pretrained EfficientNet-B0 feature taps at strides 4..32.

    Requires torchvision; only used when pretrained_encoder is requested.
    """

    channels = (24, 40, 112, 320)
    _taps = (3, 4, 6, 9)  # feature-block boundaries at strides 4, 8, 16, 32

    def __init__(self):
        super().__init__()
        try:
            from torchvision.models import EfficientNet_B0_Weights, efficientnet_b0
        except ImportError as exc:
            raise ImportError(
                "pretrained_encoder=True requires torchvision "
                "(pip install laneseg[pretrained])"
            ) from exc
        backbone = efficientnet_b0(weights=EfficientNet_B0_Weights.IMAGENET1K_V1)
        self.features = backbone.features

    def forward(self, x):
        feats = []
        tap = 0
        for i, block in enumerate(self.features):
            x = block(x)
            if tap < len(self._taps) and i + 1 == self._taps[tap]:
                feats.append(x)
                tap += 1
        return feats


class FPNSegmenter(nn.Module):
    def __init__(self, encoder, pyramid_channels=256, head_channels=128, num_classes=3):
        super().__init__()
        self.encoder = encoder
        self.laterals = nn.ModuleList(
            nn.Conv2d(c, pyramid_channels, 1) for c in encoder.channels
        )
        self.heads = nn.ModuleList(
            nn.Sequential(
                nn.Conv2d(pyramid_channels, head_channels, 3, padding=1),
                nn.ReLU(inplace=True),
            )
            for _ in encoder.channels
        )
        self.classifier = nn.Conv2d(head_channels, num_classes, 1)

    def forward(self, x):
        in_size = x.shape[2:]
        feats = self.encoder(x)
        laterals = [lat(f) for lat, f in zip(self.laterals, feats)]
        # top-down pathway: coarse levels upsampled 2x and added
        for i in range(len(laterals) - 2, -1, -1):
            laterals[i] = laterals[i] + F.interpolate(
                laterals[i + 1], size=laterals[i].shape[2:], mode="nearest"
            )
        merged = None
        target = laterals[0].shape[2:]  # stride-4 resolution
        for head, level in zip(self.heads, laterals):
            y = head(level)
            if y.shape[2:] != target:
                y = F.interpolate(y, size=target, mode="bilinear", align_corners=False)
            merged = y if merged is None else merged + y
        logits = self.classifier(merged)
        logits = F.interpolate(logits, size=in_size, mode="bilinear", align_corners=False)
        return F.softmax(logits, dim=1)


def build_fpn(config: ModelConfig, seed: int | None = None) -> ModelGraph:
    """Construct the FPN graph described by config."""
    if config.arch != "fpn":
        raise ValueError(f"config.arch must be 'fpn', got {config.arch!r}")
    if seed is not None:
        torch.manual_seed(seed)
    encoder = EfficientNetB0Encoder() if config.pretrained_encoder else SmallPyramidEncoder()
    net = FPNSegmenter(
        encoder,
        pyramid_channels=config.pyramid_channels,
        head_channels=config.head_channels,
        num_classes=config.num_classes,
    )
    return ModelGraph(net=net, config=config, parameter_count=count_parameters(net))
