"""Attention-gated U-Net producing a single-channel lane probability map.

Encoder: four double-conv stages of widths C, 2C, 4C, 8C with 2x2 max-pooling
between them, then a 16C bottleneck. Decoder: four up-stages, each bilinear
2x upsampling followed by a 3x3 conv, an additive attention gate on the
encoder skip, concatenation, and a double conv. A final 1x1 conv plus sigmoid
yields per-pixel probabilities in [0, 1]. No normalization layers.
"""

from __future__ import annotations

import torch
import torch.nn.functional as F
from torch import nn

from .config import ModelConfig, ModelGraph, count_parameters


class DoubleConv(nn.Module):
    def __init__(self, in_ch, out_ch):
        super().__init__()
        self.block = nn.Sequential(
            nn.Conv2d(in_ch, out_ch, 3, padding=1),
            nn.ReLU(inplace=True),
            nn.Conv2d(out_ch, out_ch, 3, padding=1),
            nn.ReLU(inplace=True),
        )

    def forward(self, x):
        return self.block(x)


class AttentionGate(nn.Module):
    """Additive attention over an encoder skip, driven by a decoder gate.

    alpha = sigmoid(score(relu(project_skip(skip) + project_gate(gate)))),
    returned output is skip * alpha with alpha broadcast over channels.
    """

    def __init__(self, skip_channels, gate_channels, inter_channels=None):
        super().__init__()
        inter = inter_channels or max(1, skip_channels // 2)
        self.project_skip = nn.Conv2d(skip_channels, inter, 1)
        self.project_gate = nn.Conv2d(gate_channels, inter, 1)
        self.score = nn.Conv2d(inter, 1, 1)

    def forward(self, skip, gate, alpha_override=None):
        if skip.shape[2:] != gate.shape[2:]:
            raise ValueError(
                f"skip and gate must be spatially aligned, got {tuple(skip.shape)} "
                f"vs {tuple(gate.shape)}"
            )
        if alpha_override is not None:
            return skip * alpha_override
        mixed = F.relu(self.project_skip(skip) + self.project_gate(gate))
        alpha = torch.sigmoid(self.score(mixed))
        return skip * alpha


class UpBlock(nn.Module):
    """Bilinear 2x upsampling + 3x3 conv, attention-gated skip, double conv."""

    def __init__(self, in_ch, out_ch):
        super().__init__()
        self.reduce = nn.Conv2d(in_ch, out_ch, 3, padding=1)
        self.gate = AttentionGate(out_ch, out_ch)
        self.fuse = DoubleConv(2 * out_ch, out_ch)

    def forward(self, x, skip):
        x = F.interpolate(x, size=skip.shape[2:], mode="bilinear", align_corners=False)
        x = F.relu(self.reduce(x), inplace=True)
        gated = self.gate(skip, x)
        return self.fuse(torch.cat([gated, x], dim=1))


class AttentionUNet(nn.Module):
    def __init__(self, base_width=44, in_channels=3, out_channels=1):
        super().__init__()
        c = base_width
        self.enc1 = DoubleConv(in_channels, c)
        self.enc2 = DoubleConv(c, 2 * c)
        self.enc3 = DoubleConv(2 * c, 4 * c)
        self.enc4 = DoubleConv(4 * c, 8 * c)
        self.pool = nn.MaxPool2d(2)
        self.bottleneck = DoubleConv(8 * c, 16 * c)
        self.up4 = UpBlock(16 * c, 8 * c)
        self.up3 = UpBlock(8 * c, 4 * c)
        self.up2 = UpBlock(4 * c, 2 * c)
        self.up1 = UpBlock(2 * c, c)
        self.head = nn.Conv2d(c, out_channels, 1)
        # lane pixels are rare; start the head near the background prior so
        # early optimization is not spent collapsing to all-background
        nn.init.constant_(self.head.bias, -2.0)

    def forward(self, x):
        s1 = self.enc1(x)
        s2 = self.enc2(self.pool(s1))
        s3 = self.enc3(self.pool(s2))
        s4 = self.enc4(self.pool(s3))
        b = self.bottleneck(self.pool(s4))
        d4 = self.up4(b, s4)
        d3 = self.up3(d4, s3)
        d2 = self.up2(d3, s2)
        d1 = self.up1(d2, s1)
        return torch.sigmoid(self.head(d1))


def build_unet_attention(config: ModelConfig, seed: int | None = None) -> ModelGraph:
    """Construct the attention U-Net graph described by config."""
    if config.arch != "unet_attn":
        raise ValueError(f"config.arch must be 'unet_attn', got {config.arch!r}")
    if seed is not None:
        torch.manual_seed(seed)
    net = AttentionUNet(base_width=config.base_width, out_channels=config.num_classes)
    return ModelGraph(net=net, config=config, parameter_count=count_parameters(net))
