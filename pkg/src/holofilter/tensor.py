"""Dense map arithmetic: forward operations and their vector-Jacobian products.

Arrays are plain float64 ``numpy.ndarray``; score and feature maps use the
(height, width, channel) layout. Every differentiable op ``f`` has a matching
``f_backward`` that maps the gradient of a scalar objective with respect to
``f``'s output to gradients with respect to ``f``'s inputs, so pipelines are
differentiated by chaining backward calls in reverse order. There is no graph
engine; callers keep whatever intermediates the backward pass needs.
"""

from __future__ import annotations

from typing import Callable, NamedTuple

import numpy as np

# Finite stand-in for minus infinity when masking channels: dominates any
# realistic score while keeping every stored value finite.
NEG_MASK = -1.0e30


class GradPair(NamedTuple):
    """A value together with a gradient (same shape as the differentiated input)."""

    value: np.ndarray
    gradient: np.ndarray


def _as_f64(x) -> np.ndarray:
    return np.asarray(x, dtype=np.float64)


def sigmoid(x) -> np.ndarray:
    """Elementwise logistic function, stable for arbitrarily large |x|."""
    x = _as_f64(x)
    z = np.exp(-np.abs(x))  # in (0, 1], never overflows
    return np.where(x >= 0, 1.0 / (1.0 + z), z / (1.0 + z))


def sigmoid_backward(grad_out, out) -> np.ndarray:
    """VJP of sigmoid given its output."""
    return _as_f64(grad_out) * out * (1.0 - out)


def logit(p, eps: float = 1e-7) -> np.ndarray:
    """Inverse sigmoid, with inputs clamped to [eps, 1 - eps] to stay finite."""
    _check_eps(eps)
    q = np.clip(_as_f64(p), eps, 1.0 - eps)
    return np.log(q) - np.log1p(-q)


def logit_backward(grad_out, p, eps: float = 1e-7) -> np.ndarray:
    """VJP of logit; zero wherever the input was clamped."""
    _check_eps(eps)
    p = _as_f64(p)
    q = np.clip(p, eps, 1.0 - eps)
    active = (p > eps) & (p < 1.0 - eps)
    return np.where(active, _as_f64(grad_out) / (q * (1.0 - q)), 0.0)


def _check_eps(eps: float) -> None:
    if not 0.0 < eps < 0.5:
        raise ValueError(f"eps must lie in (0, 0.5), got {eps}")


def conv2d(x, kernel, bias, dilation: int = 1, stride: int = 1) -> np.ndarray:
    """'Same'-padded 2-D cross-correlation over an (h, w, c_in) map.

    ``kernel`` is (k, k, c_in, c_out) with k odd; zero padding covers the
    dilated footprint (k - 1) * dilation + 1, so the output spatial size is
    (ceil(h / stride), ceil(w / stride)). Accumulation runs in a fixed
    (row, col, channel) tap order so results are bit-reproducible.
    """
    x, kernel, bias = _as_f64(x), _as_f64(kernel), _as_f64(bias)
    _check_conv_shapes(x, kernel, bias, dilation, stride)
    k = kernel.shape[0]
    h, w, c_in = x.shape
    c_out = kernel.shape[3]
    out_h = -(-h // stride)
    out_w = -(-w // stride)
    pad = (k - 1) * dilation // 2
    xp = np.pad(x, ((pad, pad), (pad, pad), (0, 0)))
    out = np.zeros((out_h, out_w, c_out))
    out += bias
    for di in range(k):
        rows = slice(di * dilation, di * dilation + (out_h - 1) * stride + 1, stride)
        for dj in range(k):
            cols = slice(dj * dilation, dj * dilation + (out_w - 1) * stride + 1, stride)
            patch = xp[rows, cols]
            for ci in range(c_in):
                out += patch[:, :, ci, None] * kernel[di, dj, ci]
    return out


def conv2d_backward(grad_out, x, kernel, dilation: int = 1, stride: int = 1):
    """VJP of conv2d: returns (grad_x, grad_kernel, grad_bias)."""
    x, kernel = _as_f64(x), _as_f64(kernel)
    g = _as_f64(grad_out)
    k = kernel.shape[0]
    h, w, _ = x.shape
    out_h = -(-h // stride)
    out_w = -(-w // stride)
    if g.shape != (out_h, out_w, kernel.shape[3]):
        raise ValueError(f"grad_out shape {g.shape} does not match conv output "
                         f"({out_h}, {out_w}, {kernel.shape[3]})")
    pad = (k - 1) * dilation // 2
    xp = np.pad(x, ((pad, pad), (pad, pad), (0, 0)))
    gxp = np.zeros_like(xp)
    grad_kernel = np.zeros_like(kernel)
    for di in range(k):
        rows = slice(di * dilation, di * dilation + (out_h - 1) * stride + 1, stride)
        for dj in range(k):
            cols = slice(dj * dilation, dj * dilation + (out_w - 1) * stride + 1, stride)
            patch = xp[rows, cols]
            grad_kernel[di, dj] = np.tensordot(patch, g, axes=([0, 1], [0, 1]))
            gxp[rows, cols] += g @ kernel[di, dj].T
    grad_x = gxp[pad:pad + h, pad:pad + w]
    return grad_x, grad_kernel, g.sum(axis=(0, 1))


def _check_conv_shapes(x, kernel, bias, dilation, stride) -> None:
    if x.ndim != 3:
        raise ValueError(f"input must be (h, w, c_in), got shape {x.shape}")
    if kernel.ndim != 4 or kernel.shape[0] != kernel.shape[1]:
        raise ValueError(f"kernel must be (k, k, c_in, c_out), got shape {kernel.shape}")
    if kernel.shape[0] % 2 == 0:
        raise ValueError(f"kernel side must be odd, got {kernel.shape[0]}")
    if kernel.shape[2] != x.shape[2]:
        raise ValueError(f"kernel expects {kernel.shape[2]} input channels, map has {x.shape[2]}")
    if bias.shape != (kernel.shape[3],):
        raise ValueError(f"bias shape {bias.shape} does not match {kernel.shape[3]} output channels")
    if int(dilation) != dilation or dilation < 1:
        raise ValueError(f"dilation must be a positive integer, got {dilation}")
    if int(stride) != stride or stride < 1:
        raise ValueError(f"stride must be a positive integer, got {stride}")


def relu(x) -> np.ndarray:
    return np.maximum(_as_f64(x), 0.0)


def relu_backward(grad_out, x) -> np.ndarray:
    return np.where(_as_f64(x) > 0, _as_f64(grad_out), 0.0)


def global_max_pool(x) -> np.ndarray:
    """Per-channel spatial maximum of an (h, w, c) map, as a length-c vector."""
    x = _as_f64(x)
    if x.ndim != 3 or x.shape[0] < 1 or x.shape[1] < 1:
        raise ValueError(f"expected a non-empty (h, w, c) map, got shape {x.shape}")
    return x.reshape(-1, x.shape[2]).max(axis=0)


def global_max_pool_backward(grad_out, x) -> np.ndarray:
    """VJP of global_max_pool: routes each channel's gradient to the first
    (row-major) position attaining the maximum."""
    x = _as_f64(x)
    c = x.shape[2]
    flat = x.reshape(-1, c)
    idx = np.argmax(flat, axis=0)
    g = np.zeros_like(flat)
    g[idx, np.arange(c)] = _as_f64(grad_out)
    return g.reshape(x.shape)


def _axis_coords(n_in: int, n_out: int):
    """Align-corners source coordinates: floor index, neighbor, fraction."""
    if n_out > 1:
        src = np.arange(n_out) * ((n_in - 1) / (n_out - 1))
    else:
        src = np.zeros(1)
    i0 = np.minimum(np.floor(src).astype(np.int64), n_in - 1)
    i1 = np.minimum(i0 + 1, n_in - 1)
    return i0, i1, src - i0


def bilinear_upsample(x, out_h: int, out_w: int) -> np.ndarray:
    """Channelwise align-corners bilinear interpolation of an (h, w, c) map.

    Output extents must be at least the input extents; a size-1 input axis
    maps every output coordinate to index 0.
    """
    x = _as_f64(x)
    if x.ndim != 3:
        raise ValueError(f"expected an (h, w, c) map, got shape {x.shape}")
    h, w, _ = x.shape
    if min(h, w, out_h, out_w) < 1:
        raise ValueError("extents must be positive")
    if out_h < h or out_w < w:
        raise ValueError(f"cannot shrink ({h}, {w}) to ({out_h}, {out_w})")
    r0, r1, fy = _axis_coords(h, out_h)
    c0, c1, fx = _axis_coords(w, out_w)
    w00 = ((1.0 - fy)[:, None] * (1.0 - fx)[None, :])[:, :, None]
    w01 = ((1.0 - fy)[:, None] * fx[None, :])[:, :, None]
    w10 = (fy[:, None] * (1.0 - fx)[None, :])[:, :, None]
    w11 = (fy[:, None] * fx[None, :])[:, :, None]
    return (w00 * x[np.ix_(r0, c0)] + w01 * x[np.ix_(r0, c1)]
            + w10 * x[np.ix_(r1, c0)] + w11 * x[np.ix_(r1, c1)])


def bilinear_upsample_backward(grad_out, in_h: int, in_w: int) -> np.ndarray:
    """VJP of bilinear_upsample onto the (in_h, in_w, c) source map."""
    g = _as_f64(grad_out)
    out_h, out_w, c = g.shape
    r0, r1, fy = _axis_coords(in_h, out_h)
    c0, c1, fx = _axis_coords(in_w, out_w)
    gx = np.zeros((in_h, in_w, c))
    for rows, cols, wy, wx in ((r0, c0, 1.0 - fy, 1.0 - fx), (r0, c1, 1.0 - fy, fx),
                               (r1, c0, fy, 1.0 - fx), (r1, c1, fy, fx)):
        np.add.at(gx, (rows[:, None], cols[None, :]),
                  (wy[:, None] * wx[None, :])[:, :, None] * g)
    return gx


def softmax_channel(x) -> np.ndarray:
    """Per-pixel channel softmax of an (h, w, c) map, max-shifted for stability."""
    x = _as_f64(x)
    if x.ndim != 3:
        raise ValueError(f"expected an (h, w, c) map, got shape {x.shape}")
    e = np.exp(x - x.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def softmax_channel_backward(grad_out, out) -> np.ndarray:
    """VJP of softmax_channel given its output."""
    g = _as_f64(grad_out)
    return out * (g - (g * out).sum(axis=-1, keepdims=True))


def grad_check(f: Callable, x, step: float = 1e-4) -> float:
    """Compare an analytic gradient against central finite differences.

    ``f`` maps an array to ``(value, gradient)`` where value is a scalar
    objective and gradient has the shape of ``x``. Returns the maximum over
    coordinates of |analytic - numeric| / max(1, |analytic|, |numeric|).
    """
    if step <= 0:
        raise ValueError(f"step must be positive, got {step}")
    x = _as_f64(x).copy()
    value, grad = f(x)
    if np.ndim(value) != 0:
        raise ValueError("objective must be scalar")
    grad = _as_f64(grad)
    if grad.shape != x.shape:
        raise ValueError(f"gradient shape {grad.shape} does not match input {x.shape}")
    worst = 0.0
    for idx in np.ndindex(x.shape):
        xp = x.copy()
        xp[idx] += step
        xm = x.copy()
        xm[idx] -= step
        numeric = (float(f(xp)[0]) - float(f(xm)[0])) / (2.0 * step)
        analytic = float(grad[idx])
        err = abs(analytic - numeric) / max(1.0, abs(analytic), abs(numeric))
        worst = max(worst, err)
    return worst
