from .augment import KINDS, AugmentationSpec, Transform, augment
from .manifest import DatasetManifest, ManifestEntry, load_manifest, save_manifest
from .sample import (
    Sample,
    read_image,
    read_mask,
    resize_pair,
    split_union_mask,
    to_bgr_bytes,
    to_rgb_normalized,
    write_image,
    write_mask,
)
from .video import extract_frames

__all__ = [
    "KINDS",
    "AugmentationSpec",
    "Transform",
    "augment",
    "DatasetManifest",
    "ManifestEntry",
    "load_manifest",
    "save_manifest",
    "Sample",
    "read_image",
    "read_mask",
    "resize_pair",
    "split_union_mask",
    "to_bgr_bytes",
    "to_rgb_normalized",
    "write_image",
    "write_mask",
    "extract_frames",
]
