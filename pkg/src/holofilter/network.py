"""A toy two-stream segmentation network, small enough to verify end to end.

A shared convolutional feature net feeds two heads: a patch head whose
max-pooled classification map yields image-level label confidences, and a
pixel head producing the segmentation map. The confidences gate the
segmentation map through the differentiable soft filter before bilinear
upsampling. Training is batch-1 SGD with momentum on the summed
segmentation and patch-classification losses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .filtering import gt_confidence, soft_filter, soft_filter_backward
from .metrics import ConfusionMatrix, MetricReport, present_labels
from .seeding import seeded_rng
from .tensor import (_axis_coords, bilinear_upsample, bilinear_upsample_backward,
                     conv2d, conv2d_backward, global_max_pool,
                     global_max_pool_backward, relu, relu_backward, sigmoid,
                     softmax_channel)

VARIANTS = ("holistic", "baseline", "holistic_gt")

SCALE_FACTORS = (0.7, 0.8, 0.9, 1.0, 1.1, 1.2, 1.3)


@dataclass
class NetworkConfig:
    """Architecture and training knobs.

    ``downsample`` is the total spatial reduction of the feature net (one
    stride-2 conv+relu stage per factor of 2). ``patch_size`` is the window,
    in input pixels, that one classification-map cell is responsible for;
    it defaults to 4x the downsample rate. ``skip_fusion`` adds a second
    pixel head on the penultimate feature stage and sums it with the
    upsampled coarse predictions, doubling the segmentation map's resolution.
    """

    num_classes: int
    feature_channels: int = 8
    downsample: int = 4
    kernel_size: int = 3
    dilation: int = 2
    hidden_channels: int = 32
    patch_size: Optional[int] = None
    loss_balance: float = 1.0
    learning_rate: float = 0.002
    momentum: float = 0.99
    epochs: int = 10
    eps: float = 1e-7
    ignore_label: int = 255
    augment: bool = False
    skip_fusion: bool = False

    def __post_init__(self):
        if self.num_classes < 2:
            raise ValueError(f"need at least two classes, got {self.num_classes}")
        s = self.downsample
        if s < 2 or s & (s - 1):
            raise ValueError(f"downsample must be a power of two >= 2, got {s}")
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise ValueError(f"kernel size must be odd, got {self.kernel_size}")
        if self.dilation < 1 or self.feature_channels < 1 or self.hidden_channels < 1:
            raise ValueError("channel counts and dilation must be positive")
        if self.loss_balance <= 0:
            raise ValueError(f"loss balance must be positive, got {self.loss_balance}")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError(f"momentum must lie in [0, 1), got {self.momentum}")
        if self.skip_fusion and s < 4:
            raise ValueError("skip fusion needs a second feature stage "
                             "(downsample >= 4)")
        if self.patch_size is None:
            self.patch_size = 4 * s
        if self.patch_size < 1:
            raise ValueError(f"patch size must be positive, got {self.patch_size}")

    @property
    def num_stages(self) -> int:
        return self.downsample.bit_length() - 1


@dataclass
class NetworkParams:
    """All learnable tensors plus matching SGD momentum buffers, by name."""

    weights: dict
    momentum: dict

    def copy(self) -> "NetworkParams":
        return NetworkParams({k: v.copy() for k, v in self.weights.items()},
                             {k: v.copy() for k, v in self.momentum.items()})


@dataclass
class TrainSample:
    """An (H, W, 3) image with values in [0, 1] and its (H, W) truth labels."""

    image: np.ndarray
    truth: np.ndarray

    def __post_init__(self):
        self.image = np.asarray(self.image, dtype=np.float64)
        self.truth = np.asarray(self.truth)
        if self.image.ndim != 3 or self.image.shape[2] != 3:
            raise ValueError(f"image must be (H, W, 3), got shape {self.image.shape}")
        if self.truth.shape != self.image.shape[:2]:
            raise ValueError(f"truth shape {self.truth.shape} does not match "
                             f"image {self.image.shape[:2]}")


class ForwardResult(NamedTuple):
    classification_map: np.ndarray   # (h, w, c) patch-head logits
    holistic_conf: np.ndarray        # (c,) max-pooled confidences
    seg_map: np.ndarray              # (h, w, c) pixel-head logits; skip
                                     # fusion doubles its resolution
    filtered_full_map: np.ndarray    # (H, W, c) filtered, upsampled logits


class LossParts(NamedTuple):
    seg: float
    cls: float
    total: float


@dataclass
class EpochStats:
    epoch: int
    seg_loss: float
    cls_loss: float
    total_loss: float
    val_mean_iu: Optional[float] = None


def _param_shapes(config: NetworkConfig) -> dict:
    k, f, d, c = (config.kernel_size, config.feature_channels,
                  config.hidden_channels, config.num_classes)
    shapes = {}
    c_in = 3
    for i in range(config.num_stages):
        shapes[f"feat{i}_w"] = (3, 3, c_in, f)
        shapes[f"feat{i}_b"] = (f,)
        c_in = f
    heads = ["patch", "pixel"]
    if config.skip_fusion:
        heads.append("pixel_tap")  # second pixel head on the penultimate stage
    for head in heads:
        shapes[f"{head}_conv_w"] = (k, k, f, d)
        shapes[f"{head}_conv_b"] = (d,)
        shapes[f"{head}_proj_w"] = (1, 1, d, c)
        shapes[f"{head}_proj_b"] = (c,)
    return shapes


def init_params(config: NetworkConfig, seed: int = 0) -> NetworkParams:
    """Centered-uniform weights scaled by 1/sqrt(fan-in); zero biases."""
    rng = seeded_rng(seed, 0x1417)
    weights = {}
    for name, shape in _param_shapes(config).items():
        if name.endswith("_b"):
            weights[name] = np.zeros(shape)
        else:
            fan_in = shape[0] * shape[1] * shape[2]
            bound = 1.0 / math.sqrt(fan_in)
            weights[name] = rng.uniform(-bound, bound, size=shape)
    return NetworkParams(weights, {k: np.zeros_like(v) for k, v in weights.items()})


def _check_image(config: NetworkConfig, image: np.ndarray) -> None:
    h, w = image.shape[:2]
    if h % config.downsample or w % config.downsample:
        raise ValueError(f"image extents {(h, w)} must be divisible by the "
                         f"downsample rate {config.downsample}")


def _run_forward(weights: dict, config: NetworkConfig, image: np.ndarray,
                 conf_override: Optional[np.ndarray] = None,
                 use_filter: bool = True, need_patch: bool = True) -> dict:
    """Forward pass keeping every intermediate the backward pass needs."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValueError(f"image must be (H, W, 3), got shape {image.shape}")
    _check_image(config, image)
    cache = {"image": image, "stages": []}
    cur = image
    for i in range(config.num_stages):
        pre = conv2d(cur, weights[f"feat{i}_w"], weights[f"feat{i}_b"], stride=2)
        act = relu(pre)
        cache["stages"].append((cur, pre, act))
        cur = act
    feat = cur
    cache["feat"] = feat

    r = config.dilation
    if need_patch:
        cache["patch_pre"] = conv2d(feat, weights["patch_conv_w"],
                                    weights["patch_conv_b"], dilation=r)
        cache["patch_act"] = relu(cache["patch_pre"])
        cache["cls_map"] = conv2d(cache["patch_act"], weights["patch_proj_w"],
                                  weights["patch_proj_b"])
        cache["conf"] = global_max_pool(cache["cls_map"])

    cache["pixel_pre"] = conv2d(feat, weights["pixel_conv_w"],
                                weights["pixel_conv_b"], dilation=r)
    cache["pixel_act"] = relu(cache["pixel_pre"])
    seg = conv2d(cache["pixel_act"], weights["pixel_proj_w"],
                 weights["pixel_proj_b"])
    if config.skip_fusion:
        # second pixel head on the feature map one stage earlier, summed with
        # the upsampled coarse predictions
        tap = cache["stages"][-1][0]
        cache["tap_pre"] = conv2d(tap, weights["pixel_tap_conv_w"],
                                  weights["pixel_tap_conv_b"], dilation=r)
        cache["tap_act"] = relu(cache["tap_pre"])
        tap_seg = conv2d(cache["tap_act"], weights["pixel_tap_proj_w"],
                         weights["pixel_tap_proj_b"])
        cache["seg_coarse"] = seg
        seg = bilinear_upsample(seg, tap_seg.shape[0], tap_seg.shape[1]) + tap_seg
    cache["seg_map"] = seg

    full_h, full_w = image.shape[:2]
    cache["use_filter"] = use_filter
    if use_filter:
        cache["used_conf"] = conf_override if conf_override is not None else cache["conf"]
        cache["filtered"] = soft_filter(cache["seg_map"], cache["used_conf"], config.eps)
        cache["full_map"] = bilinear_upsample(cache["filtered"], full_h, full_w)
    else:
        cache["full_map"] = bilinear_upsample(cache["seg_map"], full_h, full_w)
    return cache


def forward(params: NetworkParams, config: NetworkConfig, image) -> ForwardResult:
    """Run the full two-stream pipeline on one image."""
    cache = _run_forward(params.weights, config, np.asarray(image, dtype=np.float64))
    return ForwardResult(cache["cls_map"], cache["conf"], cache["seg_map"],
                         cache["full_map"])


def gt_classification_map(truth, config: NetworkConfig) -> np.ndarray:
    """Binary (h, w, c) patch-presence targets derived from pixel labels.

    Cell (i, j) covers the ``patch_size`` window centered on its stride-aligned
    input pixel, clipped at the borders; channel k is 1 iff the window holds
    at least one pixel of class k. Labels outside [0, c) are skipped.
    """
    truth = np.asarray(truth)
    if truth.ndim != 2:
        raise ValueError(f"truth must be (H, W), got shape {truth.shape}")
    s = config.downsample
    full_h, full_w = truth.shape
    if full_h % s or full_w % s:
        raise ValueError(f"truth extents {truth.shape} must be divisible by {s}")
    h, w = full_h // s, full_w // s
    c = config.num_classes
    p = config.patch_size
    out = np.zeros((h, w, c))
    for i in range(h):
        cy = i * s + s // 2
        r0, r1 = max(cy - p // 2, 0), min(cy - p // 2 + p, full_h)
        for j in range(w):
            cx = j * s + s // 2
            c0, c1 = max(cx - p // 2, 0), min(cx - p // 2 + p, full_w)
            for v in np.unique(truth[r0:r1, c0:c1]):
                if 0 <= v < c:
                    out[i, j, v] = 1.0
    return out


def classification_loss(cls_map, gt_map, eps: float = 1e-7) -> float:
    """Mean binary cross-entropy of sigmoid(cls_map) against binary targets.

    Log arguments are floored at eps so saturated-wrong cells stay finite;
    saturated-correct cells contribute essentially zero.
    """
    p = sigmoid(np.asarray(cls_map, dtype=np.float64))
    g = np.asarray(gt_map, dtype=np.float64)
    if p.shape != g.shape:
        raise ValueError(f"map shape {p.shape} does not match targets {g.shape}")
    return float(np.mean(-(g * np.log(np.maximum(p, eps))
                           + (1.0 - g) * np.log(np.maximum(1.0 - p, eps)))))


def classification_loss_backward(cls_map, gt_map, eps: float = 1e-7) -> np.ndarray:
    """Gradient of classification_loss with respect to the raw map."""
    cls_map = np.asarray(cls_map, dtype=np.float64)
    p = sigmoid(cls_map)
    g = np.asarray(gt_map, dtype=np.float64)
    d_p = (-g / np.maximum(p, eps)) * (p > eps) \
        + ((1.0 - g) / np.maximum(1.0 - p, eps)) * (1.0 - p > eps)
    return d_p * p * (1.0 - p) / p.size


def segmentation_loss(score_map, truth, ignore_label=255) -> float:
    """Mean categorical cross-entropy of the per-pixel channel softmax."""
    probs, onehot, n_valid = _seg_loss_parts(score_map, truth, ignore_label)
    picked = (probs * onehot).sum(axis=-1)[onehot.any(axis=-1)]
    return float(-np.log(picked).sum() / n_valid)


def segmentation_loss_backward(score_map, truth, ignore_label=255) -> np.ndarray:
    """Gradient of segmentation_loss with respect to the score map."""
    probs, onehot, n_valid = _seg_loss_parts(score_map, truth, ignore_label)
    return (probs * onehot.any(axis=-1, keepdims=True) - onehot) / n_valid


def _seg_loss_parts(score_map, truth, ignore_label):
    score_map = np.asarray(score_map, dtype=np.float64)
    truth = np.asarray(truth)
    if score_map.ndim != 3:
        raise ValueError(f"score map must be (H, W, c), got shape {score_map.shape}")
    if truth.shape != score_map.shape[:2]:
        raise ValueError(f"truth shape {truth.shape} does not match map "
                         f"{score_map.shape[:2]}")
    c = score_map.shape[2]
    valid = truth != ignore_label if ignore_label is not None else np.ones_like(truth, bool)
    labels = truth[valid]
    if labels.size and (labels.min() < 0 or labels.max() >= c):
        raise ValueError(f"truth labels fall outside [0, {c})")
    n_valid = int(valid.sum())
    if n_valid == 0:
        raise ValueError("all pixels are ignored")
    probs = softmax_channel(score_map)
    onehot = np.zeros_like(probs)
    ys, xs = np.nonzero(valid)
    onehot[ys, xs, truth[valid]] = 1.0
    return probs, onehot, n_valid


def total_loss(params: NetworkParams, config: NetworkConfig,
               sample: TrainSample) -> float:
    """Segmentation loss plus loss_balance times the patch-classification loss."""
    parts, _ = loss_and_grads(params, config, sample, variant="holistic")
    return parts.total


def loss_and_grads(params: NetworkParams, config: NetworkConfig,
                   sample: TrainSample, variant: str = "holistic",
                   include_classification: Optional[bool] = None):
    """One training step's losses and gradients for every weight tensor.

    Variants: ``holistic`` trains both streams through the soft filter;
    ``baseline`` upsamples the segmentation map directly and trains only the
    segmentation loss; ``holistic_gt`` replaces the learned confidences with
    the ground-truth oracle and also trains only the segmentation loss.
    ``include_classification`` overrides whether the patch BCE term enters
    the objective (default: only for ``holistic``).
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; choose from {VARIANTS}")
    weights = params.weights
    use_filter = variant != "baseline"
    need_patch = variant == "holistic"
    if include_classification is None:
        include_classification = variant == "holistic"
    conf_override = None
    if variant == "holistic_gt":
        labels = present_labels(sample.truth, config.ignore_label)
        conf_override = gt_confidence(labels, config.num_classes)

    cache = _run_forward(weights, config, sample.image, conf_override=conf_override,
                         use_filter=use_filter, need_patch=need_patch)
    seg_loss = segmentation_loss(cache["full_map"], sample.truth, config.ignore_label)
    cls_loss = 0.0
    gt_map = None
    if need_patch and include_classification:
        gt_map = gt_classification_map(sample.truth, config)
        cls_loss = classification_loss(cache["cls_map"], gt_map, config.eps)
    total = seg_loss + config.loss_balance * cls_loss

    grads = {name: np.zeros_like(w) for name, w in weights.items()}
    h, w, _ = cache["seg_map"].shape

    d_full = segmentation_loss_backward(cache["full_map"], sample.truth,
                                        config.ignore_label)
    d_small = bilinear_upsample_backward(d_full, h, w)
    if use_filter:
        d_seg, d_conf = soft_filter_backward(d_small, cache["seg_map"],
                                             cache["used_conf"], config.eps)
    else:
        d_seg, d_conf = d_small, None

    tap_grad = None
    if config.skip_fusion:
        tap_grad = _head_backward(grads, "pixel_tap", d_seg, cache["tap_act"],
                                  cache["tap_pre"], cache["stages"][-1][0],
                                  weights, config)
        coarse_h, coarse_w, _ = cache["seg_coarse"].shape
        d_seg = bilinear_upsample_backward(d_seg, coarse_h, coarse_w)

    d_feat = _head_backward(grads, "pixel", d_seg, cache["pixel_act"],
                            cache["pixel_pre"], cache["feat"], weights, config)

    if need_patch:
        d_cls = global_max_pool_backward(d_conf, cache["cls_map"])
        if include_classification:
            d_cls = d_cls + config.loss_balance * classification_loss_backward(
                cache["cls_map"], gt_map, config.eps)
        d_feat = d_feat + _head_backward(grads, "patch", d_cls, cache["patch_act"],
                                         cache["patch_pre"], cache["feat"],
                                         weights, config)

    for i in reversed(range(config.num_stages)):
        inp, pre, _ = cache["stages"][i]
        d_pre = relu_backward(d_feat, pre)
        d_feat, grads[f"feat{i}_w"], grads[f"feat{i}_b"] = conv2d_backward(
            d_pre, inp, weights[f"feat{i}_w"], stride=2)
        if tap_grad is not None and i == config.num_stages - 1:
            d_feat = d_feat + tap_grad

    return LossParts(seg_loss, cls_loss, total), grads


def _head_backward(grads, head, d_out, act, pre, feat, weights, config):
    """Backprop through a (dilated conv, relu, 1x1 conv) head; returns the
    gradient reaching the shared feature map and fills the head's grads."""
    d_act, grads[f"{head}_proj_w"], grads[f"{head}_proj_b"] = conv2d_backward(
        d_out, act, weights[f"{head}_proj_w"])
    d_pre = relu_backward(d_act, pre)
    d_feat, grads[f"{head}_conv_w"], grads[f"{head}_conv_b"] = conv2d_backward(
        d_pre, feat, weights[f"{head}_conv_w"], dilation=config.dilation)
    return d_feat


def sgd_step(params: NetworkParams, grads: dict, learning_rate: float,
             momentum: float) -> NetworkParams:
    """In-place momentum SGD: buffer <- m * buffer + grad; w <- w - lr * buffer."""
    for name, g in grads.items():
        if name not in params.weights:
            raise ValueError(f"unknown parameter {name!r}")
        if g.shape != params.weights[name].shape:
            raise ValueError(f"gradient shape {g.shape} does not match "
                             f"{name} {params.weights[name].shape}")
        buf = params.momentum[name]
        buf *= momentum
        buf += g
        params.weights[name] -= learning_rate * buf
    return params


def _resize_bilinear(x: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    # General align-corners resize (up or down); tensor.bilinear_upsample
    # keeps its no-shrink contract, augmentation needs both directions.
    r0, r1, fy = _axis_coords(x.shape[0], out_h)
    c0, c1, fx = _axis_coords(x.shape[1], out_w)
    w00 = ((1 - fy)[:, None] * (1 - fx)[None, :])[:, :, None]
    w01 = ((1 - fy)[:, None] * fx[None, :])[:, :, None]
    w10 = (fy[:, None] * (1 - fx)[None, :])[:, :, None]
    w11 = (fy[:, None] * fx[None, :])[:, :, None]
    return (w00 * x[np.ix_(r0, c0)] + w01 * x[np.ix_(r0, c1)]
            + w10 * x[np.ix_(r1, c0)] + w11 * x[np.ix_(r1, c1)])


def _nearest_indices(n_in: int, n_out: int) -> np.ndarray:
    src = np.arange(n_out) * ((n_in - 1) / (n_out - 1)) if n_out > 1 else np.zeros(1)
    return np.minimum(np.floor(src + 0.5).astype(np.int64), n_in - 1)


def _resize_nearest(labels: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    return labels[np.ix_(_nearest_indices(labels.shape[0], out_h),
                         _nearest_indices(labels.shape[1], out_w))]


def _fit_extents(arr: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Center-crop or edge-pad the two leading axes to the requested extents."""
    h, w = arr.shape[:2]
    if h > out_h:
        top = (h - out_h) // 2
        arr = arr[top:top + out_h]
    if w > out_w:
        left = (w - out_w) // 2
        arr = arr[:, left:left + out_w]
    h, w = arr.shape[:2]
    if h < out_h or w < out_w:
        pad_h, pad_w = out_h - h, out_w - w
        pad = [(pad_h // 2, pad_h - pad_h // 2), (pad_w // 2, pad_w - pad_w // 2)]
        pad += [(0, 0)] * (arr.ndim - 2)
        arr = np.pad(arr, pad, mode="edge")
    return arr


def apply_augment(sample: TrainSample, flip: bool, factor: float) -> TrainSample:
    """Deterministic core of augment: optional mirror, then rescale by
    ``factor`` (bilinear image, nearest labels) and refit to the original
    extents so downstream shapes stay stable."""
    image, truth = sample.image, sample.truth
    if flip:
        image = image[:, ::-1]
        truth = truth[:, ::-1]
    if factor != 1.0:
        h, w = truth.shape
        new_h, new_w = max(1, round(h * factor)), max(1, round(w * factor))
        image = _fit_extents(_resize_bilinear(image, new_h, new_w), h, w)
        truth = _fit_extents(_resize_nearest(truth, new_h, new_w), h, w)
    return TrainSample(np.ascontiguousarray(image), np.ascontiguousarray(truth))


def augment(sample: TrainSample, rng: np.random.Generator) -> TrainSample:
    """Random horizontal flip (p = 0.5) plus a scale factor drawn from
    SCALE_FACTORS, padded/cropped back to the original extents."""
    flip = rng.random() < 0.5
    factor = SCALE_FACTORS[rng.integers(0, len(SCALE_FACTORS))]
    return apply_augment(sample, flip, factor)


def variant_score_map(params: NetworkParams, config: NetworkConfig,
                      sample: TrainSample, variant: str = "holistic") -> np.ndarray:
    """The full-resolution score map a variant predicts from (argmax of this
    is the predicted labeling)."""
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; choose from {VARIANTS}")
    conf_override = None
    if variant == "holistic_gt":
        labels = present_labels(sample.truth, config.ignore_label)
        conf_override = gt_confidence(labels, config.num_classes)
    cache = _run_forward(params.weights, config, sample.image,
                         conf_override=conf_override,
                         use_filter=variant != "baseline",
                         need_patch=variant == "holistic")
    return cache["full_map"]


def predict(params: NetworkParams, config: NetworkConfig, sample: TrainSample,
            variant: str = "holistic") -> np.ndarray:
    """Predicted (H, W) label map for one sample."""
    return np.argmax(variant_score_map(params, config, sample, variant), axis=-1)


def evaluate(params: NetworkParams, config: NetworkConfig, samples,
             variant: str = "holistic") -> MetricReport:
    """Pool a confusion matrix over samples and compute the four metrics."""
    cm = ConfusionMatrix(config.num_classes)
    for sample in samples:
        cm.accumulate(predict(params, config, sample, variant), sample.truth,
                      config.ignore_label)
    return cm.compute()


def dataset_loss(params: NetworkParams, config: NetworkConfig, samples,
                 variant: str = "holistic") -> LossParts:
    """Mean losses over a dataset at fixed parameters (no updates)."""
    segs, clss, totals = [], [], []
    for sample in samples:
        parts, _ = loss_and_grads(params, config, sample, variant)
        segs.append(parts.seg)
        clss.append(parts.cls)
        totals.append(parts.total)
    return LossParts(float(np.mean(segs)), float(np.mean(clss)),
                     float(np.mean(totals)))


def train(dataset, config: NetworkConfig, seed: int = 0,
          variant: str = "holistic", val_data=None):
    """Batch-1 momentum SGD over shuffled epochs.

    Returns the trained parameters and one EpochStats per epoch (mean
    training losses; validation mean IU when ``val_data`` is given).
    Deterministic for a fixed (dataset, config, seed, variant).
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; choose from {VARIANTS}")
    dataset = list(dataset)
    if not dataset:
        raise ValueError("training dataset is empty")
    params = init_params(config, seed)
    rng = seeded_rng(seed, 0xE0)
    log = []
    for epoch in range(config.epochs):
        seg_sum = cls_sum = total_sum = 0.0
        for idx in rng.permutation(len(dataset)):
            sample = dataset[idx]
            if config.augment:
                sample = augment(sample, rng)
            parts, grads = loss_and_grads(params, config, sample, variant)
            sgd_step(params, grads, config.learning_rate, config.momentum)
            seg_sum += parts.seg
            cls_sum += parts.cls
            total_sum += parts.total
        n = len(dataset)
        val_miu = None
        if val_data is not None:
            val_miu = evaluate(params, config, val_data, variant).mean_iu
        log.append(EpochStats(epoch, seg_sum / n, cls_sum / n, total_sum / n,
                              val_miu))
    return params, log


def _class_color(k: int) -> np.ndarray:
    # Well-separated characteristic colors: RGB-cube corners, dimmed for
    # every block of eight so ids up to 15 stay distinct.
    bits = np.array([(k >> 0) & 1, (k >> 1) & 1, (k >> 2) & 1], dtype=np.float64)
    return 0.08 + 0.30 * (k // 8) + (0.85 - 0.25 * (k // 8)) * bits


def make_shapes_dataset(n_images: int, height: int, width: int,
                        num_classes: int, seed: int = 0) -> list:
    """Synthetic colored-shapes dataset for training smoke tests.

    Each image composes one to three axis-aligned rectangles or circles of
    distinct non-background classes over the class-0 background; every class
    has a characteristic color, and pixels carry seeded gaussian noise.
    Shape sizes are capped so the background always survives.
    """
    if num_classes < 3:
        raise ValueError(f"need at least three classes, got {num_classes}")
    if min(height, width) < 8:
        raise ValueError("images must be at least 8x8")
    palette = np.stack([_class_color(k) for k in range(num_classes)])
    samples = []
    for i in range(n_images):
        rng = seeded_rng(seed, 0x54A9, i)
        truth = np.zeros((height, width), dtype=np.int64)
        n_shapes = int(rng.integers(1, 4))
        classes = rng.choice(np.arange(1, num_classes),
                             size=min(n_shapes, num_classes - 1), replace=False)
        for cls in classes:
            # size caps keep total foreground under 3/4 of the image, so the
            # background class always survives
            if rng.random() < 0.5:
                sh = int(rng.integers(height // 4, height // 2 + 1))
                sw = int(rng.integers(width // 4, width // 2 + 1))
                top = int(rng.integers(0, height - sh + 1))
                left = int(rng.integers(0, width - sw + 1))
                truth[top:top + sh, left:left + sw] = cls
            else:
                radius = int(rng.integers(min(height, width) // 6,
                                          min(height, width) // 4 + 1))
                cy = int(rng.integers(0, height))
                cx = int(rng.integers(0, width))
                ys, xs = np.ogrid[:height, :width]
                truth[(ys - cy) ** 2 + (xs - cx) ** 2 <= radius ** 2] = cls
        image = palette[truth] + rng.normal(0.0, 0.05, size=(height, width, 3))
        samples.append(TrainSample(np.clip(image, 0.0, 1.0), truth))
    return samples
