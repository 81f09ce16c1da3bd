"""Confusion-matrix accumulation and IoU scoring.

Scoring skips pixels whose ground truth equals the ignore index. A class
whose union (TP + FP + FN) is zero never appeared in ground truth or
prediction; its IoU is undefined (NaN) and excluded from the mean rather than
counted as zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import MetricError, ParameterError

DEFAULT_IGNORE_INDEX = 255


@dataclass(frozen=True)
class LabelMap:
    """A (height, width) map of class ids with one reserved ignore id."""

    data: np.ndarray
    ignore_index: int = DEFAULT_IGNORE_INDEX

    def __post_init__(self) -> None:
        arr = self.data
        if not isinstance(arr, np.ndarray) or arr.ndim != 2:
            raise MetricError(
                f"label map must be a 2-d array, got {getattr(arr, 'shape', None)}")
        if arr.dtype not in (np.dtype(np.uint8), np.dtype(np.uint16)):
            raise MetricError(f"label map dtype must be uint8/uint16, got {arr.dtype}")
        if arr.dtype != np.uint16:
            object.__setattr__(self, "data", arr.astype(np.uint16))
        elif not arr.flags.c_contiguous:
            object.__setattr__(self, "data", np.ascontiguousarray(arr))
        if not 0 <= self.ignore_index <= np.iinfo(np.uint16).max:
            raise MetricError(f"ignore_index must fit uint16, got {self.ignore_index}")

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape  # type: ignore[return-value]


@dataclass(frozen=True)
class ConfusionMatrix:
    """counts[g, p] = scored pixels with ground truth g predicted p."""

    counts: np.ndarray

    def __post_init__(self) -> None:
        arr = self.counts
        if not isinstance(arr, np.ndarray) or arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise MetricError(f"confusion matrix must be square, got {getattr(arr, 'shape', None)}")
        if arr.dtype != np.int64:
            object.__setattr__(self, "counts", arr.astype(np.int64))
        if (self.counts < 0).any():
            raise MetricError("confusion matrix entries must be non-negative")

    @classmethod
    def zero(cls, class_count: int) -> "ConfusionMatrix":
        if class_count < 1:
            raise ParameterError(f"class count must be >= 1, got {class_count}")
        return cls(np.zeros((class_count, class_count), dtype=np.int64))

    @property
    def class_count(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def accumulate_confusion(pred: LabelMap, gt: LabelMap, class_count: int) -> ConfusionMatrix:
    """Confusion matrix of one prediction against its ground truth."""
    if class_count < 1:
        raise ParameterError(f"class count must be >= 1, got {class_count}")
    if pred.shape != gt.shape:
        raise MetricError(f"shape mismatch: pred {pred.shape} vs gt {gt.shape}")
    keep = gt.data != gt.ignore_index
    g = gt.data[keep].astype(np.int64)
    p = pred.data[keep].astype(np.int64)
    if g.size and int(g.max()) >= class_count:
        raise MetricError(
            f"ground-truth class id {int(g.max())} out of range for {class_count} classes")
    if p.size:
        if (p == pred.ignore_index).any():
            raise MetricError("prediction uses ignore_index on a scored pixel")
        if int(p.max()) >= class_count:
            raise MetricError(
                f"predicted class id {int(p.max())} out of range for {class_count} classes")
    counts = np.bincount(g * class_count + p, minlength=class_count * class_count)
    return ConfusionMatrix(counts.reshape(class_count, class_count))


def merge_confusion(a: ConfusionMatrix, b: ConfusionMatrix) -> ConfusionMatrix:
    if a.class_count != b.class_count:
        raise MetricError(f"class count mismatch: {a.class_count} vs {b.class_count}")
    return ConfusionMatrix(a.counts + b.counts)


def class_iou(cm: ConfusionMatrix) -> np.ndarray:
    """Per-class IoU in [0, 1]; NaN marks classes with zero union."""
    counts = cm.counts.astype(np.float64)
    tp = np.diag(counts)
    union = counts.sum(axis=0) + counts.sum(axis=1) - tp
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(union > 0, tp / union, np.nan)


def mean_iou(cm: ConfusionMatrix) -> float:
    """Mean of the defined per-class IoUs, as a percentage."""
    iou = class_iou(cm)
    defined = iou[~np.isnan(iou)]
    if defined.size == 0:
        raise MetricError("every class has zero union: nothing to evaluate")
    return 100.0 * float(defined.mean())
