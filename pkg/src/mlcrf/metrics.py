"""Segmentation quality criteria over a test set.

Counts are aggregated at the dataset level (totals over all images, not
per-image averages) and the four reported criteria are intersection over
union per class, its class mean, per-class pixel precision, and its class
mean. For the binary waste-vs-background task the headline IoU/Prec columns
refer to the waste class (index 1), which is far more sensitive than the
class means because background dominates the label counts.
"""

from __future__ import annotations

import json

import numpy as np

from .fields import LabelField

WASTE_CLASS = 1


class ConfusionCounts:
    """Per-class true-positive / false-positive / false-negative tallies."""

    def __init__(self, num_classes: int = 2):
        if num_classes < 2:
            raise ValueError("num_classes must be >= 2")
        self.num_classes = num_classes
        self.tp = np.zeros(num_classes, dtype=np.int64)
        self.fp = np.zeros(num_classes, dtype=np.int64)
        self.fn = np.zeros(num_classes, dtype=np.int64)

    def merge(self, other: "ConfusionCounts") -> "ConfusionCounts":
        if other.num_classes != self.num_classes:
            raise ValueError("class count mismatch")
        self.tp += other.tp
        self.fp += other.fp
        self.fn += other.fn
        return self

    def total_pixels(self) -> int:
        # Each pixel lands in exactly one TP or one (FP, FN) pair.
        return int(self.tp.sum() + self.fp.sum())


def accumulate(
    pred: LabelField, truth: LabelField, counts: ConfusionCounts
) -> ConfusionCounts:
    """Add one image's pixels into the running counts (in place)."""
    if (pred.height, pred.width) != (truth.height, truth.width):
        raise ValueError(
            f"prediction is {pred.height}x{pred.width}, "
            f"truth is {truth.height}x{truth.width}"
        )
    c = counts.num_classes
    if pred.classes > c or truth.classes > c:
        raise ValueError("labels exceed the configured class count")
    joint = np.bincount(
        truth.data.ravel().astype(np.int64) * c + pred.data.ravel(),
        minlength=c * c,
    ).reshape(c, c)
    diag = np.diag(joint)
    counts.tp += diag
    counts.fp += joint.sum(axis=0) - diag
    counts.fn += joint.sum(axis=1) - diag
    return counts


def _ratio(num: int, den: int, absent_everywhere: bool) -> float:
    if den == 0:
        # A class absent from both prediction and truth is vacuously
        # perfect; one present in truth but never predicted scores 0.
        return 1.0 if absent_everywhere else 0.0
    return num / den


def iou(counts: ConfusionCounts, cls: int) -> float:
    tp, fp, fn = int(counts.tp[cls]), int(counts.fp[cls]), int(counts.fn[cls])
    return _ratio(tp, tp + fp + fn, tp + fp + fn == 0)


def mean_iou(counts: ConfusionCounts) -> float:
    return sum(iou(counts, c) for c in range(counts.num_classes)) / counts.num_classes


def precision(counts: ConfusionCounts, cls: int) -> float:
    tp, fp, fn = int(counts.tp[cls]), int(counts.fp[cls]), int(counts.fn[cls])
    return _ratio(tp, tp + fp, tp + fp + fn == 0)


def mean_precision(counts: ConfusionCounts) -> float:
    return sum(
        precision(counts, c) for c in range(counts.num_classes)
    ) / counts.num_classes


def summarize(counts: ConfusionCounts, cls: int = WASTE_CLASS) -> dict[str, float]:
    """The four reported criteria, headline columns for class ``cls``."""
    return {
        "iou": iou(counts, cls),
        "miou": mean_iou(counts),
        "prec": precision(counts, cls),
        "mean": mean_precision(counts),
    }


def format_table(counts: ConfusionCounts, label: str = "") -> str:
    s = summarize(counts)
    head = f"{'':24s} {'IoU':>8s} {'mIoU':>8s} {'Prec':>8s} {'Mean':>8s}"
    row = (
        f"{label:24s} {100 * s['iou']:8.2f} {100 * s['miou']:8.2f} "
        f"{100 * s['prec']:8.2f} {100 * s['mean']:8.2f}"
    )
    return head + "\n" + row


def to_json(counts: ConfusionCounts) -> str:
    payload = summarize(counts)
    payload.update(
        tp=counts.tp.tolist(), fp=counts.fp.tolist(), fn=counts.fn.tolist()
    )
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"
