"""Sample container plus the image/mask primitives used everywhere else.

A Sample bundles one RGB frame with its per-lane binary masks. Images are
float32 in [0, 1] with RGB channel order; masks are uint8 in {0, 1} and the
union mask is always the elementwise OR of left and right.
"""

from __future__ import annotations

import dataclasses

import cv2
import numpy as np


@dataclasses.dataclass
class Sample:
    image: np.ndarray       # H x W x 3 float32, RGB, values in [0, 1]
    mask_left: np.ndarray   # H x W uint8 in {0, 1}
    mask_right: np.ndarray  # H x W uint8 in {0, 1}
    mask_union: np.ndarray  # H x W uint8, left | right
    frame_id: str = ""

    def __post_init__(self):
        self.validate()

    @classmethod
    def from_masks(cls, image, mask_left, mask_right, frame_id="") -> "Sample":
        """Build a sample, deriving the union mask from left | right."""
        left = np.ascontiguousarray(mask_left, dtype=np.uint8)
        right = np.ascontiguousarray(mask_right, dtype=np.uint8)
        return cls(
            image=np.ascontiguousarray(image, dtype=np.float32),
            mask_left=left,
            mask_right=right,
            mask_union=np.bitwise_or(left, right),
            frame_id=frame_id,
        )

    @property
    def shape(self) -> tuple[int, int]:
        return self.image.shape[0], self.image.shape[1]

    def validate(self):
        img = self.image
        if img.ndim != 3 or img.shape[2] != 3:
            raise ValueError(f"image must be HxWx3, got shape {img.shape}")
        if float(img.min()) < 0.0 or float(img.max()) > 1.0:
            raise ValueError("image values must lie in [0, 1]")
        hw = img.shape[:2]
        for name, mask in (
            ("mask_left", self.mask_left),
            ("mask_right", self.mask_right),
            ("mask_union", self.mask_union),
        ):
            if mask.shape != hw:
                raise ValueError(f"{name} shape {mask.shape} does not match image {hw}")
            if not np.isin(mask, (0, 1)).all():
                raise ValueError(f"{name} must be binary with values in {{0, 1}}")
        if not np.array_equal(self.mask_union, np.bitwise_or(self.mask_left, self.mask_right)):
            raise ValueError("mask_union must equal mask_left OR mask_right")


def to_rgb_normalized(raw: np.ndarray) -> np.ndarray:
    """Convert a byte image from BGR order to RGB floats in [0, 1].

    Swaps channels 0 and 2 and divides by 255.
    """
    raw = np.asarray(raw)
    if raw.ndim != 3 or raw.shape[2] != 3:
        raise ValueError(f"expected an HxWx3 byte array, got shape {raw.shape}")
    return raw[:, :, ::-1].astype(np.float32) / 255.0


def to_bgr_bytes(image: np.ndarray) -> np.ndarray:
    """Inverse of to_rgb_normalized up to quantization: RGB [0,1] -> BGR bytes."""
    u8 = np.clip(np.rint(np.asarray(image) * 255.0), 0, 255).astype(np.uint8)
    return u8[:, :, ::-1]


def resize_pair(sample: Sample, target: tuple[int, int]) -> Sample:
    """Resize image (bilinear) and masks (nearest-neighbor) to target (H, W).

    The union mask is recomputed so the Sample invariants hold afterwards.
    """
    th, tw = int(target[0]), int(target[1])
    if th < 8 or tw < 8:
        raise ValueError(f"target size must be at least 8x8, got {(th, tw)}")
    image = cv2.resize(sample.image, (tw, th), interpolation=cv2.INTER_LINEAR)
    image = np.clip(image, 0.0, 1.0)
    left = cv2.resize(sample.mask_left, (tw, th), interpolation=cv2.INTER_NEAREST)
    right = cv2.resize(sample.mask_right, (tw, th), interpolation=cv2.INTER_NEAREST)
    return Sample.from_masks(image, left, right, frame_id=sample.frame_id)


def split_union_mask(union: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split a union lane mask into (left, right) by connected components.

    Components whose mean column falls left of the image center go to the left
    mask, the rest to the right. When every component sits on one side, the
    leftmost component is still forced to the left mask so both outputs are
    nonempty whenever two or more components exist.
    """
    union = np.ascontiguousarray(union, dtype=np.uint8)
    if union.ndim != 2:
        raise ValueError(f"union mask must be 2-D, got shape {union.shape}")
    left = np.zeros_like(union)
    right = np.zeros_like(union)
    n_labels, labels = cv2.connectedComponents(union, connectivity=8)
    if n_labels <= 1:
        return left, right
    center = union.shape[1] / 2.0
    mean_cols = []
    for lab in range(1, n_labels):
        cols = np.nonzero(labels == lab)[1]
        mean_cols.append((cols.mean(), lab))
    mean_cols.sort()
    sides = {lab: (0 if mc < center else 1) for mc, lab in mean_cols}
    if len(mean_cols) >= 2:
        # leftmost component always counts as left, rightmost as right
        sides[mean_cols[0][1]] = 0
        sides[mean_cols[-1][1]] = 1
    for mc, lab in mean_cols:
        target = left if sides[lab] == 0 else right
        target[labels == lab] = 1
    return left, right


def read_image(path) -> np.ndarray:
    """Read an image file and return RGB floats in [0, 1]."""
    raw = cv2.imread(str(path), cv2.IMREAD_COLOR)
    if raw is None:
        raise IOError(f"cannot read image file: {path}")
    return to_rgb_normalized(raw)


def write_image(path, image: np.ndarray):
    """Write an RGB [0,1] image as a lossless 8-bit file."""
    if not cv2.imwrite(str(path), to_bgr_bytes(image)):
        raise IOError(f"cannot write image file: {path}")


def read_mask(path) -> np.ndarray:
    """Read a single-channel mask file; 0 = background, 255 = lane."""
    raw = cv2.imread(str(path), cv2.IMREAD_GRAYSCALE)
    if raw is None:
        raise IOError(f"cannot read mask file: {path}")
    return (raw >= 128).astype(np.uint8)


def write_mask(path, mask: np.ndarray):
    """Write a binary mask as single-channel 8-bit with values {0, 255}."""
    if not cv2.imwrite(str(path), (np.asarray(mask, dtype=np.uint8) * 255)):
        raise IOError(f"cannot write mask file: {path}")
