"""Label-set contamination and the hard-filtering sweep over its grid.

Ground-truth label sets are degraded by removing true labels and adding
spurious ones, which dials their recall and precision; sweeping both knobs
while hard-filtering a fixed set of score maps measures how much each axis
actually costs in segmentation quality.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .filtering import ScoreMapSet, hard_filter_argmax
from .metrics import (DEFAULT_IGNORE_LABEL, ConfusionMatrix, MetricReport,
                      label_set_pr)
from .seeding import seeded_rng

# Contamination levels swept by default: fractional low end, then 1..10.
DEFAULT_GRID = (0.0, 0.2, 0.4, 0.6, 0.8,
                1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0)

GRID_CSV_HEADER = "n_p,n_r,precision,recall,pAcc,mAcc,mIU,fwIU,empty_set_fallbacks"

_SEL_STREAM = 0xA5
_IMG_STREAM = 0x5A


@dataclass(frozen=True)
class ContaminationSpec:
    """How many spurious labels to add and true labels to remove per image.

    Fractional parts apply to a matching fraction of images: with
    remove_count = 2.3, every image loses 2 true labels and a seeded 30% of
    the images lose one more.
    """

    add_count: float
    remove_count: float
    seed: int

    def __post_init__(self):
        if self.add_count < 0 or self.remove_count < 0:
            raise ValueError("contamination counts must be nonnegative")


@dataclass
class GridRecord:
    """One grid cell: the contamination levels, the achieved mean label-set
    precision/recall, and the metrics after hard filtering."""

    add_count: float
    remove_count: float
    precision: float
    recall: float
    report: MetricReport
    empty_set_fallbacks: int

    def csv_row(self) -> str:
        r = self.report
        return (f"{self.add_count:.6f},{self.remove_count:.6f},"
                f"{self.precision:.6f},{self.recall:.6f},"
                f"{r.pixel_acc:.6f},{r.mean_acc:.6f},{r.mean_iu:.6f},{r.fw_iu:.6f},"
                f"{self.empty_set_fallbacks}")


def _cell_key(spec: ContaminationSpec):
    # Distinct integer key per (add, remove) cell; counts are resolved to
    # micro-units so 0.2 and 2.0 never collide.
    return int(round(spec.add_count * 1e6)), int(round(spec.remove_count * 1e6))


def _split_count(count: float, n_images: int, rng) -> tuple[int, set]:
    """Integer part applied to every image plus a seeded draw of the images
    that take the fractional extra."""
    base = math.floor(count)
    extra = int(round((count - base) * n_images))
    chosen = set()
    if extra:
        chosen = {int(i) for i in rng.choice(n_images, size=extra, replace=False)}
    return base, chosen


def contaminate(truth_sets, spec: ContaminationSpec, num_classes: int) -> list:
    """Degrade each image's label set by the requested amounts, deterministically.

    Removals draw uniformly from the image's true labels (capped at the set
    size); additions draw uniformly, without replacement, from the complement
    of the original true set. Which images take the fractional extras is one
    dataset-level seeded draw, so results do not depend on iteration order.
    """
    truth_sets = [set(int(v) for v in s) for s in truth_sets]
    for s in truth_sets:
        if not s:
            raise ValueError("every ground-truth label set must be nonempty")
        if any(k < 0 or k >= num_classes for k in s):
            raise ValueError(f"labels fall outside [0, {num_classes})")
    if spec.add_count > num_classes:
        raise ValueError(f"cannot add {spec.add_count} labels with only "
                         f"{num_classes} classes")
    n = len(truth_sets)
    key = _cell_key(spec)
    sel_rng = seeded_rng(spec.seed, *key, _SEL_STREAM)
    base_remove, extra_remove = _split_count(spec.remove_count, n, sel_rng)
    base_add, extra_add = _split_count(spec.add_count, n, sel_rng)

    out = []
    for i, labels in enumerate(truth_sets):
        rng = seeded_rng(spec.seed, *key, _IMG_STREAM, i)
        ordered = sorted(labels)
        n_remove = min(base_remove + (i in extra_remove), len(ordered))
        removed = set(int(v) for v in rng.choice(ordered, size=n_remove, replace=False))
        n_add = base_add + (i in extra_add)
        complement = sorted(set(range(num_classes)) - labels)
        if n_add > len(complement):
            raise ValueError(f"image {i}: cannot add {n_add} labels, only "
                             f"{len(complement)} classes are absent")
        added = set(int(v) for v in rng.choice(complement, size=n_add, replace=False))
        out.append((labels - removed) | added)
    return out


def run_grid(data, add_counts=DEFAULT_GRID, remove_counts=DEFAULT_GRID,
             seed: int = 0, ignore_label=DEFAULT_IGNORE_LABEL) -> list:
    """Hard-filter every score map under every contamination cell.

    For each (add, remove) pair: contaminate the truth label sets, filter
    each map with its contaminated set (falling back to the full label set
    when contamination emptied it, counted per record), pool one confusion
    matrix, and average per-image precision/recall. Records are ordered
    add-major, remove-minor.
    """
    data = list(data)
    if not data:
        raise ValueError("no score maps given")
    num_classes = data[0].num_classes
    for sms in data:
        if sms.num_classes != num_classes:
            raise ValueError("score maps disagree on the number of classes")
    truth_sets = [sms.truth_label_set(ignore_label) for sms in data]
    full_set = set(range(num_classes))

    records = []
    for add_count in add_counts:
        for remove_count in remove_counts:
            spec = ContaminationSpec(float(add_count), float(remove_count), seed)
            contaminated = contaminate(truth_sets, spec, num_classes)
            cm = ConfusionMatrix(num_classes)
            fallbacks = 0
            precisions = []
            recalls = []
            for sms, allowed, truth_set in zip(data, contaminated, truth_sets):
                pr = label_set_pr(allowed, truth_set)
                precisions.append(pr.precision)
                recalls.append(pr.recall)
                if not allowed:
                    allowed = full_set
                    fallbacks += 1
                predicted = hard_filter_argmax(sms.scores, allowed)
                cm.accumulate(predicted, sms.truth, ignore_label)
            records.append(GridRecord(spec.add_count, spec.remove_count,
                                      float(np.mean(precisions)),
                                      float(np.mean(recalls)),
                                      cm.compute(), fallbacks))
    return records


_METRIC_FIELDS = {
    "precision": lambda r: r.precision,
    "recall": lambda r: r.recall,
    "pixel_acc": lambda r: r.report.pixel_acc,
    "mean_acc": lambda r: r.report.mean_acc,
    "mean_iu": lambda r: r.report.mean_iu,
    "fw_iu": lambda r: r.report.fw_iu,
}


def render_surface(records, metric: str = "mean_iu", cell_px: int = 1,
                   baseline=None):
    """Color-map one metric of a rectangular grid of records.

    Returns (rgb, meta): an RGB uint8 raster with remove counts on the rows
    and add counts on the columns (both ascending, ``cell_px`` pixels per
    cell), and a metadata dict carrying the value range, axes, and the
    optional unfiltered baseline value.
    """
    if metric not in _METRIC_FIELDS:
        raise ValueError(f"unknown metric {metric!r}; choose from "
                         f"{sorted(_METRIC_FIELDS)}")
    if cell_px < 1:
        raise ValueError("cell_px must be positive")
    records = list(records)
    if not records:
        raise ValueError("no records to render")
    adds = sorted({r.add_count for r in records})
    removes = sorted({r.remove_count for r in records})
    if len(records) != len(adds) * len(removes):
        raise ValueError(f"ragged grid: {len(records)} records for "
                         f"{len(adds)} x {len(removes)} cells")
    values = np.full((len(removes), len(adds)), np.nan)
    row_of = {v: i for i, v in enumerate(removes)}
    col_of = {v: j for j, v in enumerate(adds)}
    pick = _METRIC_FIELDS[metric]
    for r in records:
        i, j = row_of[r.remove_count], col_of[r.add_count]
        if not np.isnan(values[i, j]):
            raise ValueError(f"ragged grid: duplicate cell "
                             f"({r.add_count}, {r.remove_count})")
        values[i, j] = pick(r)

    vmin, vmax = float(values.min()), float(values.max())
    t = (values - vmin) / (vmax - vmin) if vmax > vmin else np.full_like(values, 0.5)
    low = np.array([40.0, 40.0, 160.0])
    high = np.array([250.0, 250.0, 80.0])
    rgb = (low + t[:, :, None] * (high - low)).round().astype(np.uint8)
    rgb = np.repeat(np.repeat(rgb, cell_px, axis=0), cell_px, axis=1)
    meta = {"metric": metric, "min": vmin, "max": vmax, "baseline": baseline,
            "add_counts": adds, "remove_counts": removes}
    return rgb, meta


def make_noisy_scoremaps(n_images: int, height: int, width: int,
                         num_classes: int, labels_per_image: int,
                         margin: float = 4.0, noise: float = 3.0,
                         absent_penalty: float = 0.0, seed: int = 0) -> list:
    """Synthetic score maps with a controllable pixel error rate.

    Each image draws ``labels_per_image`` distinct classes, lays them out as
    the truth map (every drawn class appears at least once), and scores each
    pixel with gaussian noise plus ``margin`` on the true channel. Larger
    noise relative to margin makes the plain argmax noisier, which is what
    label filtering then cleans up. ``absent_penalty`` is subtracted from the
    channels of classes absent from the image, mimicking a predictor that
    learned to suppress implausible classes without fully silencing them.
    """
    if not 1 <= labels_per_image <= num_classes:
        raise ValueError(f"labels_per_image must lie in [1, {num_classes}]")
    if height * width < labels_per_image:
        raise ValueError("not enough pixels to place every drawn label")
    data = []
    for i in range(n_images):
        rng = seeded_rng(seed, 0xD07, i)
        classes = rng.choice(num_classes, size=labels_per_image, replace=False)
        truth = classes[rng.integers(0, labels_per_image, size=(height, width))]
        truth.flat[:labels_per_image] = rng.permutation(classes)
        scores = rng.normal(0.0, noise, size=(height, width, num_classes))
        absent = np.setdiff1d(np.arange(num_classes), classes)
        scores[:, :, absent] -= absent_penalty
        scores[np.arange(height)[:, None], np.arange(width)[None, :], truth] += margin
        data.append(ScoreMapSet(scores, truth))
    return data
