"""Holistic label filtering of pixel score maps.

Two forms: hard filtering restricts the per-pixel argmax to an allowed label
set; the soft filter multiplies sigmoid-normalized image-level confidences
into the sigmoid-normalized score map and maps the product back through the
inverse sigmoid, which keeps the whole operation differentiable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .metrics import DEFAULT_IGNORE_LABEL, present_labels
from .tensor import (NEG_MASK, bilinear_upsample, logit, logit_backward,
                     sigmoid, sigmoid_backward)

# Confidence magnitude that saturates the sigmoid to 1 or 0 at machine
# precision while every stored value stays finite.
GT_CONFIDENCE = 1.0e4


@dataclass
class ScoreMapSet:
    """Per-image pixel logits (h, w, c) paired with an (h, w) truth label map."""

    scores: np.ndarray
    truth: np.ndarray

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64)
        self.truth = np.asarray(self.truth)
        if self.scores.ndim != 3:
            raise ValueError(f"scores must be (h, w, c), got shape {self.scores.shape}")
        if self.truth.shape != self.scores.shape[:2]:
            raise ValueError(f"truth shape {self.truth.shape} does not match "
                             f"score map spatial dims {self.scores.shape[:2]}")

    @property
    def num_classes(self) -> int:
        return self.scores.shape[2]

    def truth_label_set(self, ignore_label=DEFAULT_IGNORE_LABEL) -> set:
        return present_labels(self.truth, ignore_label)


def hard_filter_argmax(scores, allowed) -> np.ndarray:
    """Per-pixel argmax restricted to the allowed label set.

    Disallowed channels are pushed to NEG_MASK before the argmax; ties break
    to the lowest class index. The allowed set must be nonempty and inside
    [0, c).
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 3:
        raise ValueError(f"scores must be (h, w, c), got shape {scores.shape}")
    c = scores.shape[2]
    allowed = {int(k) for k in allowed}
    if not allowed:
        raise ValueError("allowed label set is empty")
    if any(k < 0 or k >= c for k in allowed):
        raise ValueError(f"allowed labels fall outside [0, {c})")
    mask = np.full(c, NEG_MASK)
    mask[sorted(allowed)] = 0.0
    return np.argmax(scores + mask, axis=-1).astype(np.int64)


def soft_filter(seg, conf, eps: float = 1e-7) -> np.ndarray:
    """Differentiable holistic filter of an (h, w, c) score map.

    out = logit(sigmoid(seg) * sigmoid(conf), eps) per channel, so a channel
    whose image-level confidence saturates to 1 passes through unchanged and
    one saturating to 0 is clamped down to logit(eps).
    """
    seg = np.asarray(seg, dtype=np.float64)
    conf = np.asarray(conf, dtype=np.float64)
    _check_filter_shapes(seg, conf)
    return logit(sigmoid(seg) * sigmoid(conf)[None, None, :], eps)


def soft_filter_backward(grad_out, seg, conf, eps: float = 1e-7):
    """VJP of soft_filter: returns (grad_seg, grad_conf); the confidence
    gradient sums over all pixels."""
    seg = np.asarray(seg, dtype=np.float64)
    conf = np.asarray(conf, dtype=np.float64)
    _check_filter_shapes(seg, conf)
    p = sigmoid(seg)
    q = sigmoid(conf)[None, None, :]
    d_prod = logit_backward(grad_out, p * q, eps)
    grad_seg = sigmoid_backward(d_prod * q, p)
    grad_conf = sigmoid_backward((d_prod * p).sum(axis=(0, 1)), sigmoid(conf))
    return grad_seg, grad_conf


def _check_filter_shapes(seg, conf) -> None:
    if seg.ndim != 3:
        raise ValueError(f"score map must be (h, w, c), got shape {seg.shape}")
    if conf.shape != (seg.shape[2],):
        raise ValueError(f"confidence shape {conf.shape} does not match "
                         f"{seg.shape[2]} channels")


def gt_confidence(truth_labels, num_classes: int) -> np.ndarray:
    """Oracle image-level confidences: +GT_CONFIDENCE for present labels,
    -GT_CONFIDENCE for absent ones."""
    conf = np.full(num_classes, -GT_CONFIDENCE)
    labels = {int(k) for k in truth_labels}
    if any(k < 0 or k >= num_classes for k in labels):
        raise ValueError(f"labels fall outside [0, {num_classes})")
    conf[sorted(labels)] = GT_CONFIDENCE
    return conf


def threshold_labels(conf, tau: float = 0.0) -> set:
    """Label set whose confidences strictly exceed the threshold."""
    conf = np.asarray(conf, dtype=np.float64)
    return {int(k) for k in np.flatnonzero(conf > tau)}


def filter_then_upsample(seg, conf, out_h: int, out_w: int, eps: float = 1e-7,
                         upsample_first: bool = False) -> np.ndarray:
    """Soft-filter an (h, w, c) map and bilinearly upsample it to (out_h, out_w).

    Filtering before upsampling is the normative (and cheaper) order;
    ``upsample_first`` swaps the two for comparison runs.
    """
    if upsample_first:
        return soft_filter(bilinear_upsample(seg, out_h, out_w), conf, eps)
    return bilinear_upsample(soft_filter(seg, conf, eps), out_h, out_w)
