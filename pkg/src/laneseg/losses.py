"""Segmentation losses: binary dice per lane, their combination, and BCE.

All three accept torch tensors or numpy arrays (converted without copying
dtype information away, so float64 inputs keep float64 precision) and return
a LossValue whose value is a differentiable scalar tensor.
"""

from __future__ import annotations

import dataclasses

import numpy as np
import torch

BCE_CLAMP = 1e-7


@dataclasses.dataclass
class LossValue:
    value: torch.Tensor              # 0-dim tensor, differentiable
    components: dict[str, torch.Tensor]

    def __float__(self) -> float:
        return float(self.value.detach())

    def component_floats(self) -> dict[str, float]:
        return {k: float(v.detach()) for k, v in self.components.items()}


def _as_tensor(x) -> torch.Tensor:
    if isinstance(x, torch.Tensor):
        return x
    return torch.as_tensor(np.asarray(x))


def _as_batched(x: torch.Tensor) -> torch.Tensor:
    if x.ndim == 2:
        return x.unsqueeze(0)
    if x.ndim == 3:
        return x
    raise ValueError(f"expected HxW or BxHxW input, got shape {tuple(x.shape)}")


def _check_binary(target: torch.Tensor, name: str):
    if not torch.logical_or(target == 0, target == 1).all():
        raise ValueError(f"{name} must be binary with values in {{0, 1}}")


def binary_dice_loss(pred, target, epsilon: float = 1.0) -> LossValue:
    """1 - (2*sum(pred*target) + eps) / (sum(pred) + sum(target) + eps).

    Computed per sample and averaged over the batch; value lies in [0, 1].
    """
    if epsilon <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    pred = _as_tensor(pred)
    target = _as_tensor(target)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: pred {tuple(pred.shape)} vs target {tuple(target.shape)}")
    with torch.no_grad():
        if float(pred.min()) < 0.0 or float(pred.max()) > 1.0:
            raise ValueError("pred values must lie in [0, 1]")
    _check_binary(target, "target")
    p = _as_batched(pred)
    p = p.reshape(p.shape[0], -1)
    t = _as_batched(target).reshape(p.shape).to(p.dtype)
    intersection = (p * t).sum(dim=1)
    dice = (2.0 * intersection + epsilon) / (p.sum(dim=1) + t.sum(dim=1) + epsilon)
    loss = (1.0 - dice).mean()
    return LossValue(value=loss, components={"dice": loss})


def multi_dice_loss(pred, target_left, target_right, epsilon: float = 1.0) -> LossValue:
    """Mean of the per-lane dice losses over softmax output channels.

    pred carries the class axis last with order (background, left, right) and
    must sum to 1 per pixel.
    """
    pred = _as_tensor(pred)
    if pred.ndim not in (3, 4) or pred.shape[-1] != 3:
        raise ValueError(f"pred must be [B x] H x W x 3, got shape {tuple(pred.shape)}")
    with torch.no_grad():
        if float((pred.sum(dim=-1) - 1.0).abs().max()) > 1e-4:
            raise ValueError("pred channels must sum to 1 per pixel")
    left = binary_dice_loss(pred[..., 1], target_left, epsilon)
    right = binary_dice_loss(pred[..., 2], target_right, epsilon)
    value = (left.value + right.value) / 2.0
    return LossValue(
        value=value,
        components={"dice_left": left.value, "dice_right": right.value},
    )


def bce_loss(pred, target) -> LossValue:
    """Pixel-mean binary cross entropy, probabilities clamped away from 0/1."""
    pred = _as_tensor(pred)
    target = _as_tensor(target)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: pred {tuple(pred.shape)} vs target {tuple(target.shape)}")
    _check_binary(target, "target")
    p = pred.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP)
    t = target.to(p.dtype)
    loss = -(t * torch.log(p) + (1.0 - t) * torch.log1p(-p)).mean()
    return LossValue(value=loss, components={"bce": loss})
