"""Video ingestion: decompose a video file into individual frame images."""

from __future__ import annotations

from pathlib import Path

import cv2

from ..errors import EmptyVideoError, VideoIngestError

FRAME_NAME = "frame_%06d.png"


def extract_frames(video_path, out_dir, stride: int = 1) -> int:
    """Write every stride-th frame of a video as a lossless image file.

    Frames are written to out_dir as frame_000000.png, frame_000001.png, ...
    in source order; a frame with source index i is kept iff i % stride == 0.
    Returns the number of files written.
    """
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    video_path = Path(video_path)
    if not video_path.is_file():
        raise VideoIngestError(f"video file not found: {video_path}")
    cap = cv2.VideoCapture(str(video_path))
    if not cap.isOpened():
        raise VideoIngestError(f"cannot open video: {video_path}")

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = 0
    index = 0
    try:
        while True:
            ok, frame = cap.read()
            if not ok:
                break
            if index % stride == 0:
                out_path = out_dir / (FRAME_NAME % written)
                if not cv2.imwrite(str(out_path), frame):
                    raise VideoIngestError(f"cannot write frame file: {out_path}")
                written += 1
            index += 1
    finally:
        cap.release()

    if index == 0:
        raise EmptyVideoError(f"video contains no decodable frames: {video_path}")
    return written
