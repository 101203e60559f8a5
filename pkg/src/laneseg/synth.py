"""Procedural road scenes with exact left/right lane ground truth.

Each scene is a gray road below a horizon with two lane lines rendered as
quadratics x(y) = a*(y - h)^2 + b*(y - h) + c. Both lines share curvature and
slope and sit lane_width_px apart, so the left line's mean column is always
left of the right line's. The ground-truth masks are exactly the rasterized
line supports; the random draws behind a scene are exposed as LaneGeometry so
tests can re-rasterize independently.
"""

from __future__ import annotations

import dataclasses
import warnings
from pathlib import Path

import numpy as np

from .data.manifest import DatasetManifest, ManifestEntry, save_manifest
from .data.sample import Sample, write_image, write_mask

ROAD_SHADE = 0.30
SKY_SHADE = 0.55
LINE_SHADE = 0.85


@dataclasses.dataclass(frozen=True)
class SceneParams:
    image_size: tuple[int, int] = (128, 160)
    lane_curvature: float = 4e-4       # max |quadratic coefficient|
    lane_width_px: float = 48.0
    line_thickness_px: float = 3.0
    texture_noise_sigma: float = 0.02
    horizon_row_fraction: float = 0.45

    def __post_init__(self):
        h, w = self.image_size
        if h < 16 or w < 16:
            raise ValueError(f"image_size must be at least 16x16, got {self.image_size}")
        if self.line_thickness_px < 1:
            raise ValueError("line_thickness_px must be >= 1")
        if self.lane_width_px <= 2 * self.line_thickness_px:
            raise ValueError("lane_width_px must exceed 2 * line_thickness_px")
        if self.lane_width_px > w / 2:
            raise ValueError("lane_width_px must be at most half the image width")
        if not (0.2 < self.horizon_row_fraction < 0.8):
            raise ValueError("horizon_row_fraction must lie in (0.2, 0.8)")
        if self.lane_curvature < 0 or self.texture_noise_sigma < 0:
            raise ValueError("lane_curvature and texture_noise_sigma must be >= 0")

    @classmethod
    def scaled_to(cls, height: int, width: int, **overrides) -> "SceneParams":
        """Defaults with lane width and line thickness scaled to the image."""
        values = {
            "image_size": (height, width),
            "lane_width_px": 0.30 * width,
            "line_thickness_px": max(2.0, round(width / 53)),
        }
        values.update(overrides)
        return cls(**values)


@dataclasses.dataclass(frozen=True)
class LaneGeometry:
    """The random draws that fully determine a scene's lane lines."""

    horizon_row: int
    curvature: float     # shared quadratic coefficient a
    slope: float         # shared linear coefficient b
    center_col: float    # column of the lane midline at the horizon
    lane_width_px: float

    def column(self, side: str, row: int) -> float:
        dy = row - self.horizon_row
        offset = -self.lane_width_px / 2 if side == "left" else self.lane_width_px / 2
        return self.curvature * dy * dy + self.slope * dy + self.center_col + offset


def _scene_rng(seed: int, stream: int) -> np.random.Generator:
    # separate streams for geometry draws and texture noise
    return np.random.default_rng(np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, stream]))


def sample_geometry(seed: int, params: SceneParams) -> LaneGeometry:
    """Draw the lane geometry for one scene; pure function of (seed, params)."""
    rng = _scene_rng(seed, 0)
    h, w = params.image_size
    horizon = int(round(params.horizon_row_fraction * h))
    rows_below = max(1, h - 1 - horizon)
    # bound the slope/jitter so the straight-lane mean-column ordering holds
    slope_max = params.lane_width_px / (4.0 * rows_below)
    curvature = float(rng.uniform(-params.lane_curvature, params.lane_curvature))
    slope = float(rng.uniform(-slope_max, slope_max))
    jitter = float(rng.uniform(-params.lane_width_px / 8, params.lane_width_px / 8))
    return LaneGeometry(
        horizon_row=horizon,
        curvature=curvature,
        slope=slope,
        center_col=w / 2.0 + jitter,
        lane_width_px=params.lane_width_px,
    )


def rasterize_lane(geometry: LaneGeometry, side: str, shape, thickness: float) -> np.ndarray:
    """Paint one lane line below the horizon, one horizontal run per row."""
    h, w = shape
    mask = np.zeros((h, w), dtype=np.uint8)
    run = max(1, int(round(thickness)))
    for row in range(geometry.horizon_row, h):
        lo = int(round(geometry.column(side, row) - thickness / 2.0))
        hi = lo + run
        lo, hi = max(lo, 0), min(hi, w)
        if lo < hi:
            mask[row, lo:hi] = 1
    return mask


def generate_scene(seed: int, params: SceneParams) -> Sample:
    geometry = sample_geometry(seed, params)
    return render_scene(seed, params, geometry)


def render_scene(seed: int, params: SceneParams, geometry: LaneGeometry) -> Sample:
    h, w = params.image_size
    left = rasterize_lane(geometry, "left", (h, w), params.line_thickness_px)
    right = rasterize_lane(geometry, "right", (h, w), params.line_thickness_px)

    rows = np.arange(h, dtype=np.float32)[:, None]
    image = np.empty((h, w), dtype=np.float32)
    sky = rows < geometry.horizon_row
    depth = np.clip((rows - geometry.horizon_row) / max(1, h - geometry.horizon_row), 0, 1)
    image[:] = np.where(sky, SKY_SHADE, ROAD_SHADE + 0.12 * depth)
    image = np.repeat(image[:, :, None], 3, axis=2)
    image[(left | right) > 0] = LINE_SHADE

    if params.texture_noise_sigma > 0:
        noise = _scene_rng(seed, 1).normal(0.0, params.texture_noise_sigma, size=image.shape)
        image = image + noise.astype(np.float32)
    return Sample.from_masks(
        np.clip(image, 0.0, 1.0), left, right, frame_id=f"scene_{seed & 0xFFFFFFFF:08d}"
    )


def _child_seed(seed: int, index: int) -> int:
    ss = np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, index])
    return int(ss.generate_state(1, np.uint64)[0])


def generate_dataset(
    seed: int,
    n: int,
    params: SceneParams,
    out_dir,
    val_fraction: float = 0.1,
) -> DatasetManifest:
    """Write n scenes plus a manifest with a train/val split.

    The validation split takes floor(val_fraction * n) samples (at least one
    when n >= 2) from the end of the sequence; n == 1 yields a train-only
    dataset with a warning. Deterministic per (seed, params).
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not (0.0 < val_fraction < 1.0):
        raise ValueError("val_fraction must lie in (0, 1)")
    out_dir = Path(out_dir)
    frames_dir = out_dir / "frames"
    masks_dir = out_dir / "masks"
    frames_dir.mkdir(parents=True, exist_ok=True)
    masks_dir.mkdir(parents=True, exist_ok=True)

    n_val = int(np.floor(val_fraction * n))
    if n >= 2:
        n_val = max(1, n_val)
    else:
        if n_val == 0:
            warnings.warn("n=1 produces a train-only dataset with an empty val split")
        n_val = 0
    first_val = n - n_val

    entries = []
    for i in range(n):
        sample = generate_scene(_child_seed(seed, i), params)
        frame_rel = f"frames/frame_{i:06d}.png"
        left_rel = f"masks/frame_{i:06d}_left.png"
        right_rel = f"masks/frame_{i:06d}_right.png"
        write_image(out_dir / frame_rel, sample.image)
        write_mask(out_dir / left_rel, sample.mask_left)
        write_mask(out_dir / right_rel, sample.mask_right)
        entries.append(
            ManifestEntry(
                frame=frame_rel,
                mask_left=left_rel,
                mask_right=right_rel,
                split="train" if i < first_val else "val",
            )
        )

    manifest = DatasetManifest(entries=entries, root=out_dir)
    save_manifest(manifest, out_dir / "manifest.json")
    return manifest
