"""Dataset manifest: an ordered record of frames, masks, and split membership.

On disk a manifest is a single JSON document::

    {"entries": [{"frame": str, "mask_left": str, "mask_right": str,
                  "split": "train"|"val"}, ...],
     "version": 1}

Paths are stored relative to the manifest file so dataset directories can be
moved around freely.
"""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path

import cv2

from ..errors import ManifestError
from .sample import Sample, read_image, read_mask

MANIFEST_VERSION = 1
SPLITS = ("train", "val")


@dataclasses.dataclass(frozen=True)
class ManifestEntry:
    frame: str
    mask_left: str
    mask_right: str
    split: str

    def paths(self, root: Path):
        return (root / self.frame, root / self.mask_left, root / self.mask_right)


@dataclasses.dataclass
class DatasetManifest:
    entries: list[ManifestEntry]
    root: Path = Path(".")

    @property
    def counts(self) -> dict[str, int]:
        out = {s: 0 for s in SPLITS}
        for e in self.entries:
            out[e.split] += 1
        return out

    def split_entries(self, split: str) -> list[ManifestEntry]:
        if split not in SPLITS:
            raise ValueError(f"unknown split {split!r}")
        return [e for e in self.entries if e.split == split]

    def load_sample(self, entry: ManifestEntry) -> Sample:
        frame, left, right = entry.paths(self.root)
        return Sample.from_masks(
            read_image(frame), read_mask(left), read_mask(right), frame_id=entry.frame
        )

    def __eq__(self, other):
        return isinstance(other, DatasetManifest) and self.entries == other.entries


def save_manifest(manifest: DatasetManifest, path):
    path = Path(path)
    doc = {
        "entries": [
            {
                "frame": e.frame,
                "mask_left": e.mask_left,
                "mask_right": e.mask_right,
                "split": e.split,
            }
            for e in manifest.entries
        ],
        "version": MANIFEST_VERSION,
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_manifest(path, validate: bool = True) -> DatasetManifest:
    """Load and validate a manifest.

    With validate=True (the default) every referenced file must exist and
    decode; a missing or unreadable file raises ManifestError naming the path.
    """
    path = Path(path)
    if not path.is_file():
        raise ManifestError(f"manifest file not found: {path}")
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ManifestError(f"cannot parse manifest {path}: {exc}") from exc

    if not isinstance(doc, dict) or doc.get("version") != MANIFEST_VERSION:
        raise ManifestError(
            f"manifest {path} has unsupported version {doc.get('version')!r}"
        )
    raw_entries = doc.get("entries")
    if not isinstance(raw_entries, list):
        raise ManifestError(f"manifest {path} has no entry list")

    entries = []
    for i, rec in enumerate(raw_entries):
        if not isinstance(rec, dict):
            raise ManifestError(f"manifest entry {i} is not an object")
        try:
            entry = ManifestEntry(
                frame=rec["frame"],
                mask_left=rec["mask_left"],
                mask_right=rec["mask_right"],
                split=rec["split"],
            )
        except KeyError as exc:
            raise ManifestError(f"manifest entry {i} is missing field {exc}") from exc
        if entry.split not in SPLITS:
            raise ManifestError(f"manifest entry {i} has unknown split {entry.split!r}")
        entries.append(entry)

    manifest = DatasetManifest(entries=entries, root=path.parent)
    if validate:
        _validate_files(manifest)
    return manifest


def _validate_files(manifest: DatasetManifest):
    for entry in manifest.entries:
        for p in entry.paths(manifest.root):
            if not p.is_file():
                raise ManifestError(f"manifest references missing file: {p}")
            if cv2.imread(str(p), cv2.IMREAD_UNCHANGED) is None:
                raise ManifestError(f"manifest references undecodable file: {p}")
