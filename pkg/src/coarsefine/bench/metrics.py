"""OTB precision and success metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from coarsefine.boxes import BoundingBox

PRECISION_THRESHOLDS = np.arange(51, dtype=np.float64)  # pixels
SUCCESS_THRESHOLDS = np.arange(21) / 20.0  # overlap ratio


def center_error(pred: BoundingBox, gt: BoundingBox) -> float:
    (px, py), (gx, gy) = pred.center, gt.center
    return math.hypot(px - gx, py - gy)


def iou(pred: BoundingBox, gt: BoundingBox) -> float:
    ix = max(0.0, min(pred.x + pred.w, gt.x + gt.w) - max(pred.x, gt.x))
    iy = max(0.0, min(pred.y + pred.h, gt.y + gt.h) - max(pred.y, gt.y))
    inter = ix * iy
    union = pred.area + gt.area - inter
    if union <= 0:
        return 0.0
    return min(1.0, inter / union)


def _precision_counts(errors) -> np.ndarray:
    errors = np.asarray(errors, dtype=np.float64)
    return np.count_nonzero(errors[None, :] <= PRECISION_THRESHOLDS[:, None], axis=1)


def _success_counts(overlaps) -> np.ndarray:
    overlaps = np.asarray(overlaps, dtype=np.float64)
    return np.count_nonzero(overlaps[None, :] > SUCCESS_THRESHOLDS[:, None], axis=1)


def precision_curve(errors) -> np.ndarray:
    """Fraction of frames with center error <= each pixel threshold."""
    return _precision_counts(errors) / len(errors)


def success_curve(overlaps) -> np.ndarray:
    """Fraction of frames with overlap strictly above each threshold."""
    return _success_counts(overlaps) / len(overlaps)


@dataclass
class EvalReport:
    precision_curve: np.ndarray
    success_curve: np.ndarray
    precision_at_20: float
    auc: float
    frames: int = 0
    per_sequence: dict = field(default_factory=dict)
    per_attribute: dict = field(default_factory=dict)
    sequence_curves: dict = field(default_factory=dict, repr=False)  # name -> (precision, success)

    @classmethod
    def from_frames(cls, errors, overlaps) -> EvalReport:
        if len(errors) == 0 or len(errors) != len(overlaps):
            raise ValueError("need equally many (>0) center errors and overlaps")
        n = len(errors)
        prec = _precision_counts(errors)
        succ = _success_counts(overlaps)
        # AUC from integer counts: one rounding, so hand fractions match exactly
        auc = int(succ.sum()) / (len(SUCCESS_THRESHOLDS) * n)
        return cls(prec / n, succ / n, float(prec[20] / n), auc, n)

    def headline(self) -> dict:
        return {"precision_at_20": self.precision_at_20, "auc": self.auc, "frames": self.frames}
