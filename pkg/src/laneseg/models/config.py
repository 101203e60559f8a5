"""Model configuration and the graph wrapper shared by both architectures."""

from __future__ import annotations

import dataclasses
import json

import numpy as np
import torch
from torch import nn

ARCHS = ("fpn", "unet_attn")
DEFAULT_INPUT_SIZE = {"fpn": (224, 224), "unet_attn": (256, 320)}
NUM_CLASSES = {"fpn": 3, "unet_attn": 1}
STRIDE_MULTIPLE = {"fpn": 32, "unet_attn": 16}


@dataclasses.dataclass
class ModelConfig:
    arch: str
    input_size: tuple[int, int] | None = None
    base_width: int = 44          # unet_attn encoder width C
    pyramid_channels: int = 256   # fpn lateral width
    head_channels: int = 128      # fpn per-level head width
    num_classes: int | None = None
    pretrained_encoder: bool = False

    def __post_init__(self):
        if self.arch not in ARCHS:
            raise ValueError(f"arch must be one of {ARCHS}, got {self.arch!r}")
        if self.input_size is None:
            self.input_size = DEFAULT_INPUT_SIZE[self.arch]
        self.input_size = (int(self.input_size[0]), int(self.input_size[1]))
        if self.num_classes is None:
            self.num_classes = NUM_CLASSES[self.arch]
        if self.num_classes != NUM_CLASSES[self.arch]:
            raise ValueError(
                f"num_classes is fixed to {NUM_CLASSES[self.arch]} for {self.arch}"
            )
        if min(self.base_width, self.pyramid_channels, self.head_channels) < 1:
            raise ValueError("channel widths must be positive")
        mult = STRIDE_MULTIPLE[self.arch]
        h, w = self.input_size
        if h % mult or w % mult:
            raise ValueError(
                f"{self.arch} input size must be divisible by {mult}, got {(h, w)}"
            )

    def to_dict(self) -> dict:
        return {
            "arch": self.arch,
            "input_size": list(self.input_size),
            "base_width": self.base_width,
            "pyramid_channels": self.pyramid_channels,
            "head_channels": self.head_channels,
            "num_classes": self.num_classes,
            "pretrained_encoder": self.pretrained_encoder,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ModelConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown model config fields: {sorted(unknown)}")
        doc = dict(doc)
        if "input_size" in doc and doc["input_size"] is not None:
            doc["input_size"] = tuple(doc["input_size"])
        return cls(**doc)

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)
            fh.write("\n")

    @classmethod
    def from_json(cls, path) -> "ModelConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclasses.dataclass
class ModelGraph:
    """A built network plus its config and reported parameter count.

    forward() follows torch conventions (NCHW tensors); predict() is the
    numpy convenience used by the pipeline and takes/returns channel-last
    B x H x W x C arrays of probabilities.
    """

    net: nn.Module
    config: ModelConfig
    parameter_count: int

    @property
    def arch(self) -> str:
        return self.config.arch

    def __call__(self, x: torch.Tensor) -> torch.Tensor:
        return self.net(x)

    def predict(self, images: np.ndarray) -> np.ndarray:
        images = np.asarray(images, dtype=np.float32)
        single = images.ndim == 3
        if single:
            images = images[None]
        if images.ndim != 4 or images.shape[3] != 3:
            raise ValueError(f"expected B x H x W x 3 images, got shape {images.shape}")
        x = torch.from_numpy(np.ascontiguousarray(images.transpose(0, 3, 1, 2)))
        self.net.eval()
        with torch.no_grad():
            y = self.net(x)
        probs = y.permute(0, 2, 3, 1).numpy()
        return probs[0] if single else probs


def count_parameters(model) -> int:
    """Total number of trainable scalar parameters in a module or graph."""
    net = model.net if isinstance(model, ModelGraph) else model
    return sum(int(p.numel()) for p in net.parameters() if p.requires_grad)


def layer_summary(model) -> str:
    """Per-layer text table (name, type, weight shape, parameter count)."""
    net = model.net if isinstance(model, ModelGraph) else model
    lines = []
    total = 0
    for name, module in net.named_modules():
        params = [
            (pn, p) for pn, p in module.named_parameters(recurse=False) if p.requires_grad
        ]
        if not params:
            continue
        n = sum(int(p.numel()) for _, p in params)
        total += n
        shapes = ", ".join(f"{pn}={tuple(p.shape)}" for pn, p in params)
        lines.append(f"{name or '<root>'} | {type(module).__name__} | {shapes} | {n}")
    lines.append(f"total | | | {total}")
    return "\n".join(lines)
