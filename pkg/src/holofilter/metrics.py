"""Segmentation scoring: confusion-matrix accumulation, the four summary
metrics (pixel accuracy, mean accuracy, mean IU, frequency-weighted IU), and
label-set precision/recall for image-level predictions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_IGNORE_LABEL = 255

REPORT_CSV_HEADER = "pAcc,mAcc,mIU,fwIU,valid_classes"


@dataclass
class MetricReport:
    """The four summary metrics plus the per-class IU breakdown.

    ``per_class_iu[i]`` is None for classes whose union (true + predicted
    pixels) is empty; ``valid_classes`` counts the classes that do have a
    defined IU, so means over all c classes are recoverable if wanted.
    """

    pixel_acc: float
    mean_acc: float
    mean_iu: float
    fw_iu: float
    per_class_iu: list
    valid_classes: int

    def csv_row(self) -> str:
        return (f"{self.pixel_acc:.6f},{self.mean_acc:.6f},{self.mean_iu:.6f},"
                f"{self.fw_iu:.6f},{self.valid_classes}")


@dataclass
class LabelSetPR:
    precision: float
    recall: float


class ConfusionMatrix:
    """c-by-c pixel counts; ``counts[i, j]`` = pixels of true class i predicted
    as class j. Counts are int64 so whole datasets cannot overflow."""

    def __init__(self, num_classes: int, counts=None):
        if num_classes < 1:
            raise ValueError(f"need at least one class, got {num_classes}")
        self.num_classes = int(num_classes)
        if counts is None:
            self.counts = np.zeros((num_classes, num_classes), dtype=np.int64)
        else:
            counts = np.asarray(counts)
            if counts.shape != (num_classes, num_classes):
                raise ValueError(f"counts shape {counts.shape} does not match "
                                 f"{num_classes} classes")
            if (counts < 0).any():
                raise ValueError("counts must be nonnegative")
            self.counts = counts.astype(np.int64)

    def accumulate(self, predicted, truth, ignore_label=DEFAULT_IGNORE_LABEL):
        """Add the pixel counts of one (predicted, truth) label-map pair.

        Pixels carrying ``ignore_label`` in either map are skipped; everything
        else must lie in [0, num_classes).
        """
        pred = np.asarray(predicted)
        true = np.asarray(truth)
        if pred.shape != true.shape:
            raise ValueError(f"label map shapes differ: {pred.shape} vs {true.shape}")
        pred = pred.astype(np.int64).ravel()
        true = true.astype(np.int64).ravel()
        if ignore_label is not None:
            keep = (true != ignore_label) & (pred != ignore_label)
            pred = pred[keep]
            true = true[keep]
        c = self.num_classes
        for name, arr in (("predicted", pred), ("truth", true)):
            if arr.size and (arr.min() < 0 or arr.max() >= c):
                raise ValueError(f"{name} labels fall outside [0, {c})")
        self.counts += np.bincount(true * c + pred, minlength=c * c).reshape(c, c)
        return self

    def merge(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        """Entrywise sum with another matrix over the same classes (pure)."""
        if other.num_classes != self.num_classes:
            raise ValueError(f"class counts differ: {self.num_classes} vs {other.num_classes}")
        return ConfusionMatrix(self.num_classes, self.counts + other.counts)

    def compute(self) -> MetricReport:
        """Evaluate the four metrics from the accumulated counts."""
        counts = self.counts
        total = int(counts.sum())
        if total == 0:
            raise ValueError("empty confusion matrix")
        diag = np.diag(counts)
        true_totals = counts.sum(axis=1)
        pred_totals = counts.sum(axis=0)
        union = true_totals + pred_totals - diag

        pixel_acc = float(diag.sum() / total)
        present = true_totals > 0
        mean_acc = float(np.mean(diag[present] / true_totals[present]))
        valid = union > 0
        iu = diag[valid] / union[valid]
        mean_iu = float(np.mean(iu))
        fw_iu = float((true_totals[valid] * iu).sum() / total)
        per_class = [None] * self.num_classes
        for i, value in zip(np.flatnonzero(valid), iu):
            per_class[i] = float(value)
        return MetricReport(pixel_acc, mean_acc, mean_iu, fw_iu,
                            per_class, int(valid.sum()))


def label_set_pr(predicted, truth) -> LabelSetPR:
    """Set-overlap precision and recall of a predicted label set.

    An empty prediction scores (0, 0) by convention; an empty ground-truth
    set is an error.
    """
    true_set = {int(v) for v in truth}
    if not true_set:
        raise ValueError("ground-truth label set is empty")
    pred_set = {int(v) for v in predicted}
    inter = len(pred_set & true_set)
    precision = inter / len(pred_set) if pred_set else 0.0
    return LabelSetPR(precision, inter / len(true_set))


def present_labels(label_map, ignore_label=None) -> set:
    """Distinct labels appearing in a map, minus the ignore label."""
    values = np.unique(np.asarray(label_map))
    return {int(v) for v in values if ignore_label is None or v != ignore_label}
