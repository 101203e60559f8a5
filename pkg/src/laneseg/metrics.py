"""Pixel- and frame-level evaluation built on mergeable confusion matrices.

Conventions:
  * precision and recall are 0 when their denominator is 0
  * foreground IoU is 1 when tp = fp = fn = 0 (nothing to find, nothing found)
  * iou_mean averages foreground and background IoU
  * display percentages truncate (floor) at two decimals; with integer counts
    the truncation is computed in exact integer arithmetic
"""

from __future__ import annotations

import dataclasses

import numpy as np


@dataclasses.dataclass(frozen=True)
class ConfusionMatrix:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    def __post_init__(self):
        for name in ("tp", "fp", "fn", "tn"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 0:
                raise ValueError(f"{name} must be a nonnegative integer, got {v!r}")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def merge(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(
            tp=self.tp + other.tp,
            fp=self.fp + other.fp,
            fn=self.fn + other.fn,
            tn=self.tn + other.tn,
        )


@dataclasses.dataclass(frozen=True)
class MetricReport:
    accuracy: float
    precision: float
    recall: float
    iou_fg: float
    iou_mean: float

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclasses.dataclass(frozen=True)
class FrameLevelReport:
    total_frames: int
    both_detected: int
    one_detected: int
    acc_both: float   # raw ratio both_detected / total_frames
    acc_one: float
    tau: float

    @property
    def acc_both_pct(self) -> float:
        """Display percentage, truncated to two decimals."""
        return truncate_pct(self.both_detected, self.total_frames)

    @property
    def acc_one_pct(self) -> float:
        return truncate_pct(self.one_detected, self.total_frames)

    def to_dict(self) -> dict:
        return {
            "total": self.total_frames,
            "both": self.both_detected,
            "one": self.one_detected,
            "acc_both": self.acc_both_pct,
            "acc_one": self.acc_one_pct,
            "tau": self.tau,
        }


def truncate_pct(numerator: int, denominator: int) -> float:
    """Percentage of numerator/denominator truncated at two decimals."""
    if denominator <= 0:
        raise ValueError("denominator must be positive")
    return (10000 * int(numerator) // int(denominator)) / 100.0


def binarize(probs: np.ndarray, threshold: float = 0.5) -> np.ndarray:
    """1 where prob >= threshold, else 0."""
    if not (0.0 < threshold < 1.0):
        raise ValueError(f"threshold must lie in (0, 1), got {threshold}")
    return (np.asarray(probs) >= threshold).astype(np.uint8)


def confusion(pred: np.ndarray, target: np.ndarray) -> ConfusionMatrix:
    """Exact pixel counts for one prediction/target pair."""
    pred = np.asarray(pred)
    target = np.asarray(target)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: pred {pred.shape} vs target {target.shape}")
    for name, arr in (("pred", pred), ("target", target)):
        if not np.isin(arr, (0, 1)).all():
            raise ValueError(f"{name} must be binary with values in {{0, 1}}")
    p = pred.astype(bool)
    t = target.astype(bool)
    return ConfusionMatrix(
        tp=int(np.count_nonzero(p & t)),
        fp=int(np.count_nonzero(p & ~t)),
        fn=int(np.count_nonzero(~p & t)),
        tn=int(np.count_nonzero(~p & ~t)),
    )


def _ratio(num: int, denom: int, empty_value: float = 0.0) -> float:
    return num / denom if denom > 0 else empty_value


def pixel_metrics(cm: ConfusionMatrix) -> MetricReport:
    if cm.total <= 0:
        raise ValueError("confusion matrix is empty")
    iou_fg = _ratio(cm.tp, cm.tp + cm.fp + cm.fn, empty_value=1.0)
    iou_bg = _ratio(cm.tn, cm.tn + cm.fp + cm.fn, empty_value=1.0)
    return MetricReport(
        accuracy=(cm.tp + cm.tn) / cm.total,
        precision=_ratio(cm.tp, cm.tp + cm.fp),
        recall=_ratio(cm.tp, cm.tp + cm.fn),
        iou_fg=iou_fg,
        iou_mean=(iou_fg + iou_bg) / 2.0,
    )


def foreground_iou(pred: np.ndarray, target: np.ndarray) -> float:
    """IoU of two binary masks; 1.0 when both are empty."""
    cm = confusion(pred, target)
    return _ratio(cm.tp, cm.tp + cm.fp + cm.fn, empty_value=1.0)


def frame_lane_accuracy(per_frame, tau: float = 0.5) -> FrameLevelReport:
    """Frame-level detection from per-frame (iou_left, iou_right) pairs.

    A lane counts as detected iff its IoU >= tau; both_detected counts frames
    where both lanes pass, one_detected frames where at least one does.
    """
    pairs = list(per_frame)
    if not pairs:
        raise ValueError("per_frame list must be nonempty")
    if not (0.0 < tau < 1.0):
        raise ValueError(f"tau must lie in (0, 1), got {tau}")
    both = 0
    one = 0
    for iou_left, iou_right in pairs:
        for v in (iou_left, iou_right):
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"IoU values must lie in [0, 1], got {v}")
        left_ok = iou_left >= tau
        right_ok = iou_right >= tau
        both += int(left_ok and right_ok)
        one += int(left_ok or right_ok)
    n = len(pairs)
    return FrameLevelReport(
        total_frames=n,
        both_detected=both,
        one_detected=one,
        acc_both=both / n,
        acc_one=one / n,
        tau=tau,
    )


def report_json(pixel: MetricReport, frame: FrameLevelReport | None = None) -> dict:
    """Assemble the serializable evaluation report document."""
    doc = {"pixel": pixel.to_dict(), "version": 1}
    if frame is not None:
        doc["frame"] = frame.to_dict()
    return doc
