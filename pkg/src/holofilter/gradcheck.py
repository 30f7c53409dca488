"""Standard gradient-check instances for every differentiable op and for the
full network objective.

Each check builds a seeded random instance (kept away from relu/max-pool/clamp
kinks where the true derivative jumps), wraps the op in a scalar objective
with fixed random output weights, and compares the analytic gradient against
central finite differences via ``tensor.grad_check``.
"""

from __future__ import annotations

import numpy as np

from . import network
from .filtering import soft_filter, soft_filter_backward
from .seeding import seeded_rng
from .tensor import (bilinear_upsample, bilinear_upsample_backward, conv2d,
                     conv2d_backward, grad_check, logit, logit_backward, relu,
                     relu_backward, sigmoid, sigmoid_backward, softmax_channel,
                     softmax_channel_backward, global_max_pool,
                     global_max_pool_backward)


def _check_sigmoid(rng, step):
    x = rng.normal(0.0, 2.0, size=(4, 5))
    w = rng.normal(size=x.shape)
    return grad_check(lambda v: (np.sum(w * sigmoid(v)),
                                 sigmoid_backward(w, sigmoid(v))), x, step)


def _check_logit(rng, step):
    # interior draws: the third derivative blows up toward 0 and 1, which
    # would dominate the finite-difference truncation error
    p = rng.uniform(0.1, 0.9, size=(4, 5))
    w = rng.normal(size=p.shape)
    return grad_check(lambda v: (np.sum(w * logit(v)),
                                 logit_backward(w, v)), p, step)


def _check_relu(rng, step):
    # draws bounded away from the kink at 0
    x = rng.uniform(0.1, 3.0, size=(4, 5)) * rng.choice([-1.0, 1.0], size=(4, 5))
    w = rng.normal(size=x.shape)
    return grad_check(lambda v: (np.sum(w * relu(v)),
                                 relu_backward(w, v)), x, step)


def _check_softmax_channel(rng, step):
    x = rng.normal(0.0, 1.5, size=(3, 3, 4))
    w = rng.normal(size=x.shape)

    def f(v):
        out = softmax_channel(v)
        return np.sum(w * out), softmax_channel_backward(w, out)

    return grad_check(f, x, step)


def _check_conv2d(rng, step):
    x = rng.normal(size=(5, 5, 2))
    kernel = rng.normal(size=(3, 3, 2, 3))
    bias = rng.normal(size=3)
    w = rng.normal(size=(5, 5, 3))

    def f_x(v):
        return (np.sum(w * conv2d(v, kernel, bias, dilation=2)),
                conv2d_backward(w, v, kernel, dilation=2)[0])

    def f_k(v):
        return (np.sum(w * conv2d(x, v, bias, dilation=2)),
                conv2d_backward(w, x, v, dilation=2)[1])

    def f_b(v):
        return (np.sum(w * conv2d(x, kernel, v, dilation=2)),
                conv2d_backward(w, x, kernel, dilation=2)[2])

    return max(grad_check(f_x, x, step), grad_check(f_k, kernel, step),
               grad_check(f_b, bias, step))


def _check_global_max_pool(rng, step):
    x = rng.normal(size=(4, 4, 3))
    # one clear per-channel winner so the finite-difference step cannot
    # switch the argmax
    for k in range(3):
        x[rng.integers(0, 4), rng.integers(0, 4), k] += 4.0
    w = rng.normal(size=3)
    return grad_check(lambda v: (np.sum(w * global_max_pool(v)),
                                 global_max_pool_backward(w, v)), x, step)


def _check_bilinear_upsample(rng, step):
    x = rng.normal(size=(3, 4, 2))
    w = rng.normal(size=(7, 9, 2))
    return grad_check(lambda v: (np.sum(w * bilinear_upsample(v, 7, 9)),
                                 bilinear_upsample_backward(w, 3, 4)), x, step)


def _check_soft_filter(rng, step):
    seg = rng.uniform(-2.0, 2.0, size=(4, 4, 3))
    conf = rng.uniform(-2.0, 2.0, size=3)
    w = rng.normal(size=seg.shape)

    def f_seg(v):
        return (np.sum(w * soft_filter(v, conf)),
                soft_filter_backward(w, v, conf)[0])

    def f_conf(v):
        return (np.sum(w * soft_filter(seg, v)),
                soft_filter_backward(w, seg, v)[1])

    return max(grad_check(f_seg, seg, step), grad_check(f_conf, conf, step))


_OP_CHECKS = {
    "sigmoid": _check_sigmoid,
    "logit": _check_logit,
    "relu": _check_relu,
    "softmax_channel": _check_softmax_channel,
    "conv2d": _check_conv2d,
    "global_max_pool": _check_global_max_pool,
    "bilinear_upsample": _check_bilinear_upsample,
    "soft_filter": _check_soft_filter,
}

OP_NAMES = tuple(_OP_CHECKS)

# soft_filter composes sigmoid/product/logit, so its error floor is a little
# higher than the single primitives'.
DEFAULT_OP_TOL = 1e-6
SOFT_FILTER_TOL = 1e-4
NETWORK_TOL = 1e-3


def op_tolerance(name: str) -> float:
    return SOFT_FILTER_TOL if name == "soft_filter" else DEFAULT_OP_TOL


def check_op(name: str, seed: int = 0, step: float = 1e-4) -> float:
    """Max relative gradient error of one op on its standard instance."""
    if name not in _OP_CHECKS:
        raise ValueError(f"unknown op {name!r}; choose from {sorted(_OP_CHECKS)}")
    return _OP_CHECKS[name](seeded_rng(seed, 0x6C), step)


def _kink_margin(cache) -> float:
    """Distance of the forward pass from the nearest relu/max-pool kink."""
    margins = []
    for _, pre, _ in cache["stages"]:
        margins.append(np.abs(pre).min())
    for key in ("patch_pre", "pixel_pre"):
        margins.append(np.abs(cache[key]).min())
    cls_flat = cache["cls_map"].reshape(-1, cache["cls_map"].shape[2])
    top2 = np.sort(cls_flat, axis=0)[-2:]
    margins.append((top2[1] - top2[0]).min())
    return float(min(margins))


def check_network(seed: int = 0, step: float = 1e-6, image_size: int = 16,
                  margin_factor: float = 5.0):
    """Gradient-check the training objective against every weight tensor.

    Returns (errors, holistic_path_grad_max): the per-tensor max relative
    errors for the full two-loss objective, and the largest patch-head
    gradient magnitude when only the segmentation loss is active, which is
    the gradient that flows back through the soft filter.

    Candidate seeds are scanned until the forward pass sits at least
    ``margin_factor * step`` away from every relu/max-pool kink, so the
    finite differences never straddle a derivative jump. Sparse relu outputs
    put many pre-activations close to zero, hence the small default step.
    """
    config = network.NetworkConfig(num_classes=4, feature_channels=6,
                                   hidden_channels=12, downsample=4,
                                   patch_size=8)
    sample = network.make_shapes_dataset(1, image_size, image_size,
                                         config.num_classes, seed=seed)[0]
    threshold = margin_factor * step
    params = None
    for attempt in range(64):
        candidate = network.init_params(config, seed=seed + attempt)
        cache = network._run_forward(candidate.weights, config, sample.image)
        if _kink_margin(cache) > threshold:
            params = candidate
            break
    if params is None:
        raise RuntimeError("no kink-free initialization found; lower the step")

    def objective_for(name):
        def f(value):
            trial = params.copy()
            trial.weights[name] = value
            parts, grads = network.loss_and_grads(trial, config, sample,
                                                  variant="holistic")
            return parts.total, grads[name]
        return f

    errors = {}
    for name in sorted(params.weights):
        errors[name] = grad_check(objective_for(name), params.weights[name], step)

    _, seg_only_grads = network.loss_and_grads(params, config, sample,
                                               variant="holistic",
                                               include_classification=False)
    holistic_path = max(np.abs(seg_only_grads[name]).max()
                        for name in seg_only_grads if name.startswith("patch_"))
    return errors, float(holistic_path)
