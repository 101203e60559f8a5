"""Command-line entry point: extract, synth, train, eval, infer, params.

Exit codes: 0 success, 1 usage error, 2 runtime failure. All randomness flows
from --seed and --workers 1 (the default) is the deterministic reference mode.
Config precedence for train/params: CLI flag > --config JSON file > built-in
default.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import cv2
import numpy as np

from .data.augment import AugmentationSpec
from .data.manifest import load_manifest
from .data.sample import (
    read_image,
    resize_pair,
    split_union_mask,
    write_image,
    write_mask,
)
from .data.video import extract_frames
from .errors import LanesegError
from .metrics import (
    binarize,
    confusion,
    ConfusionMatrix,
    foreground_iou,
    frame_lane_accuracy,
    pixel_metrics,
    report_json,
)
from .models import ModelGraph, build_model, count_parameters, layer_summary
from .models.config import ModelConfig
from .synth import SceneParams, generate_dataset
from .train import TrainConfig, load_checkpoint, train

OVERLAY_COLORS = {
    "left": (0.85, 0.10, 0.10),
    "right": (0.10, 0.10, 0.85),
    "union": (0.10, 0.80, 0.10),
}
DEFAULT_BAND = (0.70, 0.95)


@dataclasses.dataclass(frozen=True)
class DeviationRecord:
    frame_id: str
    deviation_px: float
    deviation_norm: float
    valid: bool

    def to_dict(self) -> dict:
        return {
            "frame": self.frame_id,
            "dev_px": self.deviation_px,
            "dev_norm": self.deviation_norm,
            "valid": self.valid,
        }


def overlay(image, mask_left=None, mask_right=None, mask_union=None, alpha=0.5) -> np.ndarray:
    """Blend lane masks onto an RGB image at the given opacity.

    Left lanes render in a red tone, right lanes blue, union masks green.
    Pixels outside every mask are returned unchanged.
    """
    if not (0.0 <= alpha <= 1.0):
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    out = np.asarray(image, dtype=np.float32).copy()
    for name, mask in (("left", mask_left), ("right", mask_right), ("union", mask_union)):
        if mask is None:
            continue
        color = np.asarray(OVERLAY_COLORS[name], dtype=np.float32)
        sel = np.asarray(mask) > 0
        out[sel] = (1.0 - alpha) * out[sel] + alpha * color
    return out


def center_deviation(
    mask_left,
    mask_right,
    band=DEFAULT_BAND,
    image_width=None,
    frame_id="",
) -> DeviationRecord:
    """Signed offset of the lane midpoint from the image center column.

    Within the band of rows [row_lo_frac, row_hi_frac) of image height, each
    row where both lanes have pixels contributes the midpoint of the two
    per-lane mean columns; deviation_px = mean midpoint - image_width / 2.
    Invalid (never an error) when no row has both lanes or the normalized
    deviation falls outside [-2, 2].
    """
    lo_frac, hi_frac = band
    if not (0.0 <= lo_frac < hi_frac <= 1.0):
        raise ValueError(f"band must satisfy 0 <= lo < hi <= 1, got {band}")
    mask_left = np.asarray(mask_left)
    mask_right = np.asarray(mask_right)
    if mask_left.shape != mask_right.shape:
        raise ValueError("left/right masks must share a shape")
    h, w = mask_left.shape
    if image_width is None:
        image_width = w

    row_lo = int(np.floor(lo_frac * h))
    row_hi = max(row_lo + 1, int(np.floor(hi_frac * h)))
    midpoints = []
    widths = []
    for row in range(row_lo, min(row_hi, h)):
        cols_l = np.nonzero(mask_left[row])[0]
        cols_r = np.nonzero(mask_right[row])[0]
        if cols_l.size == 0 or cols_r.size == 0:
            continue
        ml, mr = float(cols_l.mean()), float(cols_r.mean())
        midpoints.append((ml + mr) / 2.0)
        widths.append(mr - ml)

    if not midpoints:
        return DeviationRecord(frame_id, 0.0, 0.0, valid=False)
    deviation_px = float(np.mean(midpoints)) - image_width / 2.0
    lane_width = float(np.mean(widths))
    if lane_width <= 0:
        return DeviationRecord(frame_id, deviation_px, 0.0, valid=False)
    deviation_norm = deviation_px / lane_width
    valid = bool(abs(deviation_norm) <= 2.0)
    return DeviationRecord(frame_id, deviation_px, deviation_norm, valid)


def predict_masks(graph: ModelGraph, image: np.ndarray, threshold=0.5):
    """Per-frame (left, right, union) binary masks from model probabilities."""
    probs = graph.predict(image)
    if graph.arch == "fpn":
        classes = probs.argmax(axis=-1)
        left = (classes == 1).astype(np.uint8)
        right = (classes == 2).astype(np.uint8)
        union = np.bitwise_or(left, right)
    else:
        union = binarize(probs[..., 0], threshold)
        left, right = split_union_mask(union)
    return left, right, union


# --- argument parsing ---------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    # usage problems exit 1 (argparse defaults to 2, which we reserve
    # for runtime failures)
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _size(text: str) -> tuple[int, int]:
    try:
        h, w = text.lower().split("x")
        return int(h), int(w)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected HxW, got {text!r}")


def build_parser() -> _Parser:
    parser = _Parser(prog="laneseg", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="decompose a video into frame images")
    p.add_argument("--video", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--stride", type=int, default=1)

    p = sub.add_parser("synth", help="generate a synthetic lane dataset")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--size", type=_size, default=None, help="image size HxW")

    p = sub.add_parser("train", help="train a model on a dataset directory")
    p.add_argument("--arch", choices=("fpn", "unet_attn"), required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None, help="JSON config file")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--learning-rate", type=float, default=None)
    p.add_argument("--augment", default=None, help="augmentation spec JSON")
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--tau", type=float, default=0.5, help="frame-level IoU threshold")
    p.add_argument("--threshold", type=float, default=0.5, help="mask binarization threshold")
    p.add_argument("--split", choices=("train", "val", "all"), default="val")
    p.add_argument("--report", required=True)

    p = sub.add_parser("infer", help="run a checkpoint over frames or a video")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--input", required=True, help="frame directory or video file")
    p.add_argument("--out", required=True)
    p.add_argument("--overlay", action="store_true")
    p.add_argument("--deviation", action="store_true")
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--band", type=float, nargs=2, default=DEFAULT_BAND)
    p.add_argument("--threshold", type=float, default=0.5)

    p = sub.add_parser("params", help="report a model's parameter count")
    p.add_argument("--arch", choices=("fpn", "unet_attn"), required=True)
    p.add_argument("--config", default=None, help="JSON config file")
    p.add_argument("--summary", action="store_true", help="print a per-layer table")

    return parser


def _load_config_file(path) -> dict:
    if path is None:
        return {}
    with open(path) as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise ValueError(f"config file {path} must hold a JSON object")
    return doc


def _model_config(arch: str, file_cfg: dict) -> ModelConfig:
    allowed = {f.name for f in dataclasses.fields(ModelConfig)}
    kwargs = {k: v for k, v in file_cfg.items() if k in allowed and k != "arch"}
    return ModelConfig.from_dict({"arch": arch, **kwargs})


# --- subcommands ---------------------------------------------------------------

def _cmd_extract(args) -> int:
    count = extract_frames(args.video, args.out, stride=args.stride)
    print(f"wrote {count} frames to {args.out}")
    return 0


def _cmd_synth(args) -> int:
    params = SceneParams() if args.size is None else SceneParams.scaled_to(*args.size)
    manifest = generate_dataset(args.seed, args.n, params, args.out)
    counts = manifest.counts
    print(f"wrote {counts['train']} train / {counts['val']} val samples to {args.out}")
    return 0


def _cmd_train(args) -> int:
    file_cfg = _load_config_file(args.config)
    model_config = _model_config(args.arch, file_cfg)

    allowed = {f.name for f in dataclasses.fields(TrainConfig)}
    overrides = {k: v for k, v in file_cfg.items() if k in allowed}
    for flag in ("seed", "epochs", "batch_size", "learning_rate"):
        value = getattr(args, flag)
        if value is not None:
            overrides[flag] = value
    cfg = TrainConfig.for_arch(args.arch, **overrides)

    manifest = load_manifest(Path(args.data) / "manifest.json")
    spec = AugmentationSpec.from_json(args.augment) if args.augment else None
    graph = build_model(model_config, seed=cfg.seed)
    bundle = train(graph, manifest, cfg, args.out, augment_spec=spec, workers=args.workers)
    last = bundle.history[-1]
    print(
        f"trained {cfg.epochs} epochs; final train loss {last['train_loss']:.4f}; "
        f"checkpoints in {args.out}"
    )
    return 0


def _resolve_checkpoint(path) -> Path:
    path = Path(path)
    if not (path / "config.json").is_file() and (path / "best" / "config.json").is_file():
        return path / "best"
    return path


def _cmd_eval(args) -> int:
    bundle = load_checkpoint(_resolve_checkpoint(args.ckpt))
    manifest = load_manifest(Path(args.data) / "manifest.json")
    entries = manifest.entries if args.split == "all" else manifest.split_entries(args.split)
    if not entries and args.split == "val":
        entries = manifest.entries
    if not entries:
        raise LanesegError(f"no samples in split {args.split!r}")

    input_size = bundle.graph.config.input_size
    cm = ConfusionMatrix()
    iou_pairs = []
    for entry in entries:
        sample = manifest.load_sample(entry)
        if sample.shape != tuple(input_size):
            sample = resize_pair(sample, input_size)
        left, right, union = predict_masks(bundle.graph, sample.image, args.threshold)
        cm = cm.merge(confusion(union, sample.mask_union))
        iou_pairs.append(
            (foreground_iou(left, sample.mask_left), foreground_iou(right, sample.mask_right))
        )

    pixel = pixel_metrics(cm)
    frame = frame_lane_accuracy(iou_pairs, tau=args.tau)
    doc = report_json(pixel, frame)
    report_path = Path(args.report)
    report_path.parent.mkdir(parents=True, exist_ok=True)
    report_path.write_text(json.dumps(doc, indent=1) + "\n")
    print(
        f"pixel: accuracy {pixel.accuracy:.4f}, precision {pixel.precision:.4f}, "
        f"recall {pixel.recall:.4f}, iou_fg {pixel.iou_fg:.4f}, iou_mean {pixel.iou_mean:.4f}"
    )
    print(
        f"frame: both {frame.acc_both_pct:.2f}%, at-least-one {frame.acc_one_pct:.2f}% "
        f"({frame.both_detected}/{frame.one_detected}/{frame.total_frames} at tau={frame.tau})"
    )
    print(f"report written to {report_path}")
    return 0


def _iter_input_frames(input_path: Path, work_dir: Path):
    """Yield (frame_id, rgb image) from a frame directory or a video file."""
    if input_path.is_dir():
        paths = sorted(
            p for p in input_path.iterdir()
            if p.suffix.lower() in (".png", ".bmp", ".jpg", ".jpeg", ".tiff")
        )
        if not paths:
            raise LanesegError(f"no image files found in {input_path}")
        for p in paths:
            yield p.stem, read_image(p)
    else:
        frames_dir = work_dir / "frames"
        extract_frames(input_path, frames_dir)
        for p in sorted(frames_dir.iterdir()):
            yield p.stem, read_image(p)


def _cmd_infer(args) -> int:
    bundle = load_checkpoint(_resolve_checkpoint(args.ckpt))
    out_dir = Path(args.out)
    masks_dir = out_dir / "masks"
    masks_dir.mkdir(parents=True, exist_ok=True)
    overlay_dir = out_dir / "overlay"
    if args.overlay:
        overlay_dir.mkdir(parents=True, exist_ok=True)

    input_size = bundle.graph.config.input_size
    records = []
    n = 0
    for frame_id, image in _iter_input_frames(Path(args.input), out_dir):
        if image.shape[:2] != tuple(input_size):
            image = np.clip(
                cv2.resize(image, (input_size[1], input_size[0]), interpolation=cv2.INTER_LINEAR),
                0.0,
                1.0,
            )
        left, right, union = predict_masks(bundle.graph, image, args.threshold)
        write_mask(masks_dir / f"{frame_id}_left.png", left)
        write_mask(masks_dir / f"{frame_id}_right.png", right)
        write_mask(masks_dir / f"{frame_id}_union.png", union)
        if args.overlay:
            write_image(
                overlay_dir / f"{frame_id}.png",
                overlay(image, mask_left=left, mask_right=right, alpha=args.alpha),
            )
        if args.deviation:
            records.append(
                center_deviation(left, right, band=tuple(args.band), frame_id=frame_id)
            )
        n += 1

    if args.deviation:
        with open(out_dir / "deviation.jsonl", "w") as fh:
            for rec in records:
                fh.write(json.dumps(rec.to_dict()) + "\n")
    print(f"processed {n} frames into {out_dir}")
    return 0


def _cmd_params(args) -> int:
    file_cfg = _load_config_file(args.config)
    config = _model_config(args.arch, file_cfg)
    graph = build_model(config, seed=0)
    if args.summary:
        print(layer_summary(graph))
    print(count_parameters(graph))
    return 0


_COMMANDS = {
    "extract": _cmd_extract,
    "synth": _cmd_synth,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "infer": _cmd_infer,
    "params": _cmd_params,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except (LanesegError, OSError, ValueError) as exc:
        print(f"laneseg {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
