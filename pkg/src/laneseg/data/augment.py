"""Seeded image augmentation with image/mask synchronization.

Ten transform kinds are supported. shift_scale_rotate is the only spatial
transform and is applied with identical parameters to the image and both
masks (nearest-neighbor for masks, constant-zero border); all other kinds are
photometric and touch the image only. Every output image is clipped back to
[0, 1] and masks are re-binarized, so augmentation preserves the Sample
invariants. Given the same (sample, spec, seed) the output is bitwise
reproducible.

Parameter conventions: a "limit" may be a single number s, meaning the range
[-s, s], or an explicit [lo, hi] pair. Multiplicative factors are drawn as
1 + u with u from the limit range.
"""

from __future__ import annotations

import dataclasses
import json
import math
from pathlib import Path

import cv2
import numpy as np

from ..errors import AugmentationSpecError
from .sample import Sample

KINDS = (
    "shift_scale_rotate",
    "additive_gaussian_noise",
    "clahe",
    "random_brightness",
    "random_gamma",
    "sharpen",
    "blur",
    "motion_blur",
    "random_contrast",
    "hue_saturation_value",
)

# Default parameter ranges; noise sigma is on the byte (0..255) scale.
DEFAULT_PARAMS = {
    "shift_scale_rotate": {
        "shift_limit": 0.0625,
        "scale_limit": 0.1,
        "rotate_limit": 15.0,
        "interpolation": "bilinear",
    },
    "additive_gaussian_noise": {"sigma_limit": [2.55, 12.75]},
    "clahe": {"clip_limit": 4.0, "tile_grid_size": 8},
    "random_brightness": {"limit": 0.2},
    "random_gamma": {"gamma_limit": [0.8, 1.25]},
    "sharpen": {"alpha_limit": [0.2, 0.5]},
    "blur": {"kernel_size": 3},
    "motion_blur": {"kernel_size": 3},
    "random_contrast": {"limit": 0.2},
    "hue_saturation_value": {"hue_limit": 10.0, "sat_limit": 0.2, "val_limit": 0.2},
}

DEFAULT_PROBABILITIES = {
    "shift_scale_rotate": 0.5,
    "additive_gaussian_noise": 0.2,
    "clahe": 0.3,
    "random_brightness": 0.3,
    "random_gamma": 0.3,
    "sharpen": 0.2,
    "blur": 0.2,
    "motion_blur": 0.2,
    "random_contrast": 0.3,
    "hue_saturation_value": 0.3,
}


@dataclasses.dataclass(frozen=True)
class Transform:
    kind: str
    p: float
    params: dict = dataclasses.field(default_factory=dict)


@dataclasses.dataclass
class AugmentationSpec:
    transforms: list[Transform]

    def __post_init__(self):
        for t in self.transforms:
            if t.kind not in KINDS:
                raise AugmentationSpecError(f"unknown transform kind {t.kind!r}")
            if not (0.0 <= t.p <= 1.0):
                raise AugmentationSpecError(
                    f"{t.kind}: probability must be in [0, 1], got {t.p}"
                )
            _check_finite(t.kind, t.params)

    @classmethod
    def default(cls) -> "AugmentationSpec":
        """The full ten-transform pipeline with default ranges."""
        return cls(
            [Transform(kind, DEFAULT_PROBABILITIES[kind], dict(DEFAULT_PARAMS[kind]))
             for kind in KINDS]
        )

    @classmethod
    def from_json(cls, path) -> "AugmentationSpec":
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise AugmentationSpecError(f"cannot read augmentation spec {path}: {exc}")
        if not isinstance(doc, list):
            raise AugmentationSpecError("augmentation spec must be a JSON list")
        transforms = []
        for rec in doc:
            try:
                transforms.append(
                    Transform(rec["kind"], float(rec["p"]), dict(rec.get("params", {})))
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise AugmentationSpecError(f"malformed transform record {rec!r}: {exc}")
        return cls(transforms)

    def to_json(self, path):
        doc = [{"kind": t.kind, "p": t.p, "params": t.params} for t in self.transforms]
        Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def _check_finite(kind, params):
    for key, value in params.items():
        values = value if isinstance(value, (list, tuple)) else [value]
        if isinstance(value, (list, tuple)) and len(value) == 0:
            raise AugmentationSpecError(f"{kind}: parameter {key} has an empty range")
        for v in values:
            if isinstance(v, (int, float)) and not math.isfinite(v):
                raise AugmentationSpecError(f"{kind}: parameter {key} is not finite")


def _range(value, default):
    """Normalize a limit into a (lo, hi) pair."""
    if value is None:
        value = default
    if isinstance(value, (list, tuple)):
        lo, hi = float(value[0]), float(value[1])
    else:
        lo, hi = -float(value), float(value)
    if hi < lo:
        raise AugmentationSpecError(f"invalid range ({lo}, {hi})")
    return lo, hi


def _uniform(rng, value, default):
    lo, hi = _range(value, default)
    return float(rng.uniform(lo, hi))


def augment(sample: Sample, spec: AugmentationSpec, seed: int) -> Sample:
    """Apply the spec's transforms in order, deterministically for a seed."""
    rng = np.random.default_rng(seed & 0xFFFFFFFFFFFFFFFF)
    image = sample.image.astype(np.float32, copy=True)
    left = sample.mask_left.copy()
    right = sample.mask_right.copy()
    for t in spec.transforms:
        if rng.random() >= t.p:
            continue
        fn = _APPLY[t.kind]
        image, left, right = fn(image, left, right, t.params, rng)
    return Sample.from_masks(np.clip(image, 0.0, 1.0), left, right, sample.frame_id)


# --- spatial -----------------------------------------------------------------

def affine_matrix(shape, angle, scale, shift_x, shift_y):
    """Rotation/scale about the pixel-grid center plus fractional shifts."""
    h, w = shape[:2]
    m = cv2.getRotationMatrix2D(((w - 1) / 2.0, (h - 1) / 2.0), angle, scale)
    m[0, 2] += shift_x * w
    m[1, 2] += shift_y * h
    return m


def warp_mask(mask, matrix):
    """Warp a binary mask with nearest-neighbor sampling, re-binarized."""
    warped = cv2.warpAffine(
        mask,
        matrix,
        (mask.shape[1], mask.shape[0]),
        flags=cv2.INTER_NEAREST,
        borderMode=cv2.BORDER_CONSTANT,
        borderValue=0,
    )
    return (warped > 0).astype(np.uint8)


def _shift_scale_rotate(image, left, right, params, rng):
    shift_lo, shift_hi = _range(params.get("shift_limit"), 0.0625)
    shift_x = float(rng.uniform(shift_lo, shift_hi))
    shift_y = float(rng.uniform(shift_lo, shift_hi))
    scale = 1.0 + _uniform(rng, params.get("scale_limit"), 0.1)
    angle = _uniform(rng, params.get("rotate_limit"), 15.0)
    interp = params.get("interpolation", "bilinear")
    if interp not in ("bilinear", "nearest"):
        raise AugmentationSpecError(f"unknown interpolation {interp!r}")
    flags = cv2.INTER_LINEAR if interp == "bilinear" else cv2.INTER_NEAREST

    m = affine_matrix(image.shape, angle, scale, shift_x, shift_y)
    image = cv2.warpAffine(
        image,
        m,
        (image.shape[1], image.shape[0]),
        flags=flags,
        borderMode=cv2.BORDER_CONSTANT,
        borderValue=0,
    )
    return image, warp_mask(left, m), warp_mask(right, m)


# --- photometric -------------------------------------------------------------

def _additive_gaussian_noise(image, left, right, params, rng):
    lo, hi = _range(params.get("sigma_limit"), [2.55, 12.75])
    sigma = float(rng.uniform(lo, hi)) / 255.0
    noise = rng.normal(0.0, sigma, size=image.shape).astype(np.float32)
    return np.clip(image + noise, 0.0, 1.0), left, right


def _clahe(image, left, right, params, rng):
    clip = float(params.get("clip_limit", 4.0))
    tiles = int(params.get("tile_grid_size", 8))
    u8 = np.clip(np.rint(image * 255.0), 0, 255).astype(np.uint8)
    lab = cv2.cvtColor(u8, cv2.COLOR_RGB2LAB)
    eq = cv2.createCLAHE(clipLimit=clip, tileGridSize=(tiles, tiles))
    lab[:, :, 0] = eq.apply(lab[:, :, 0])
    rgb = cv2.cvtColor(lab, cv2.COLOR_LAB2RGB)
    return rgb.astype(np.float32) / 255.0, left, right


def _random_brightness(image, left, right, params, rng):
    factor = 1.0 + _uniform(rng, params.get("limit"), 0.2)
    return np.clip(image * factor, 0.0, 1.0), left, right


def _random_gamma(image, left, right, params, rng):
    lo, hi = _range(params.get("gamma_limit"), [0.8, 1.25])
    gamma = float(rng.uniform(lo, hi))
    return np.power(image, gamma, dtype=np.float32), left, right


def _sharpen(image, left, right, params, rng):
    lo, hi = _range(params.get("alpha_limit"), [0.2, 0.5])
    alpha = float(rng.uniform(lo, hi))
    kernel = np.array([[0, -1, 0], [-1, 5, -1], [0, -1, 0]], dtype=np.float32)
    sharp = cv2.filter2D(image, -1, kernel)
    out = (1.0 - alpha) * image + alpha * sharp
    return np.clip(out, 0.0, 1.0), left, right


def _blur(image, left, right, params, rng):
    k = int(params.get("kernel_size", 3))
    return cv2.blur(image, (k, k)), left, right


def _motion_blur(image, left, right, params, rng):
    k = int(params.get("kernel_size", 3))
    kernel = np.zeros((k, k), dtype=np.float32)
    direction = int(rng.integers(0, 4))
    if direction == 0:
        kernel[k // 2, :] = 1.0
    elif direction == 1:
        kernel[:, k // 2] = 1.0
    elif direction == 2:
        np.fill_diagonal(kernel, 1.0)
    else:
        np.fill_diagonal(np.fliplr(kernel), 1.0)
    kernel /= kernel.sum()
    return cv2.filter2D(image, -1, kernel), left, right


def _random_contrast(image, left, right, params, rng):
    factor = 1.0 + _uniform(rng, params.get("limit"), 0.2)
    mean = float(image.mean())
    out = (image - mean) * factor + mean
    return np.clip(out, 0.0, 1.0), left, right


def _hue_saturation_value(image, left, right, params, rng):
    hue_shift = _uniform(rng, params.get("hue_limit"), 10.0)
    sat_factor = 1.0 + _uniform(rng, params.get("sat_limit"), 0.2)
    val_factor = 1.0 + _uniform(rng, params.get("val_limit"), 0.2)
    hsv = cv2.cvtColor(image, cv2.COLOR_RGB2HSV)
    hsv[:, :, 0] = np.mod(hsv[:, :, 0] + hue_shift, 360.0)
    hsv[:, :, 1] = np.clip(hsv[:, :, 1] * sat_factor, 0.0, 1.0)
    hsv[:, :, 2] = np.clip(hsv[:, :, 2] * val_factor, 0.0, 1.0)
    rgb = cv2.cvtColor(hsv, cv2.COLOR_HSV2RGB)
    return np.clip(rgb, 0.0, 1.0), left, right


_APPLY = {
    "shift_scale_rotate": _shift_scale_rotate,
    "additive_gaussian_noise": _additive_gaussian_noise,
    "clahe": _clahe,
    "random_brightness": _random_brightness,
    "random_gamma": _random_gamma,
    "sharpen": _sharpen,
    "blur": _blur,
    "motion_blur": _motion_blur,
    "random_contrast": _random_contrast,
    "hue_saturation_value": _hue_saturation_value,
}
