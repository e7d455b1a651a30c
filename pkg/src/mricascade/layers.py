"""CNN building blocks with explicit forward and backward passes.

Convolution is the deep-learning cross-correlation (no kernel flip) with
stride 1 and zero same-padding, so spatial dims are preserved; that is what
the residual connections and the data-consistency step require. Forward
passes are im2col + matmul; backward passes reuse the cached column matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import InvalidParameterError, InvalidShapeError
from .tensorcore import ComplexImage, Rng, normal_draw


@dataclass(eq=False)
class ConvLayer:
    # weights: [n_out, n_in, k, k], bias: [n_out]; stride 1, same-padding
    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        w, b = self.weights, self.bias
        if w.ndim != 4 or w.shape[2] != w.shape[3]:
            raise InvalidShapeError(f"weights must be [n_out, n_in, k, k], got {w.shape}")
        if w.shape[2] % 2 == 0:
            raise InvalidParameterError(f"kernel size must be odd, got {w.shape[2]}")
        if b.shape != (w.shape[0],):
            raise InvalidShapeError(f"bias must be [n_out]={w.shape[0]}, got {b.shape}")

    @property
    def n_out(self) -> int:
        return self.weights.shape[0]

    @property
    def n_in(self) -> int:
        return self.weights.shape[1]

    @property
    def kernel_size(self) -> int:
        return self.weights.shape[2]

    def astype(self, dtype) -> "ConvLayer":
        return ConvLayer(self.weights.astype(dtype), self.bias.astype(dtype))


def he_init(rng: Rng, n_out: int, n_in: int, k: int, dtype=np.float32) -> ConvLayer:
    """Weights ~ Normal(0, sqrt(2 / fan_in)) with fan_in = n_in*k*k, zero bias."""
    if k % 2 == 0 or k < 1:
        raise InvalidParameterError(f"kernel size must be odd and positive, got {k}")
    std = float(np.sqrt(2.0 / (n_in * k * k)))
    weights = normal_draw(rng, (n_out, n_in, k, k), std, dtype=dtype)
    return ConvLayer(weights=weights, bias=np.zeros(n_out, dtype=dtype))


@dataclass(eq=False)
class ConvCache:
    cols: np.ndarray  # [H*W, n_in*k*k]
    in_shape: tuple


@dataclass(eq=False)
class ReluCache:
    x: np.ndarray


def _im2col(x: np.ndarray, k: int) -> np.ndarray:
    c, h, w = x.shape
    p = (k - 1) // 2
    xp = np.pad(x, ((0, 0), (p, p), (p, p)))
    win = sliding_window_view(xp, (k, k), axis=(1, 2))  # [C, H, W, k, k]
    return win.transpose(1, 2, 0, 3, 4).reshape(h * w, c * k * k)


def conv_forward(layer: ConvLayer, x: np.ndarray):
    """Same-padded stride-1 cross-correlation plus per-channel bias.

    Returns the [n_out, H, W] output and the cache for the backward pass.
    """
    if x.ndim != 3 or x.shape[0] != layer.n_in:
        raise InvalidShapeError(
            f"input must be [{layer.n_in}, H, W], got {getattr(x, 'shape', None)}"
        )
    c, h, w = x.shape
    k = layer.kernel_size
    cols = _im2col(x, k)
    wmat = layer.weights.reshape(layer.n_out, -1)
    out = cols @ wmat.T  # [H*W, n_out]
    out = out.T.reshape(layer.n_out, h, w) + layer.bias[:, None, None]
    return out, ConvCache(cols=cols, in_shape=x.shape)


def conv_backward(layer: ConvLayer, cache: ConvCache, grad_out: np.ndarray):
    """Exact gradients of conv_forward: returns (grad_in, grad_w, grad_b)."""
    c, h, w = cache.in_shape
    if grad_out.shape != (layer.n_out, h, w):
        raise InvalidShapeError(
            f"grad_out must be [{layer.n_out}, {h}, {w}], got {grad_out.shape}"
        )
    k = layer.kernel_size
    p = (k - 1) // 2
    go = grad_out.reshape(layer.n_out, h * w)

    grad_b = grad_out.sum(axis=(1, 2))
    grad_w = (go @ cache.cols).reshape(layer.weights.shape)

    wmat = layer.weights.reshape(layer.n_out, -1)
    dcols = (go.T @ wmat).reshape(h, w, c, k, k)
    grad_xp = np.zeros((c, h + 2 * p, w + 2 * p), dtype=grad_out.dtype)
    for di in range(k):
        for dj in range(k):
            grad_xp[:, di : di + h, dj : dj + w] += dcols[:, :, :, di, dj].transpose(2, 0, 1)
    grad_in = grad_xp[:, p : p + h, p : p + w]
    return grad_in, grad_w, grad_b


def relu_forward(x: np.ndarray):
    return np.maximum(x, 0), ReluCache(x=x)


def relu_backward(cache: ReluCache, grad_out: np.ndarray) -> np.ndarray:
    # subgradient at exactly 0 is 0
    if grad_out.shape != cache.x.shape:
        raise InvalidShapeError(f"grad_out shape {grad_out.shape} != input shape {cache.x.shape}")
    return grad_out * (cache.x > 0)


def residual_add(module_out: ComplexImage, module_in: ComplexImage) -> ComplexImage:
    """Elementwise sum of a module's output with its input.

    The backward pass needs no cache: the upstream gradient flows to both
    branches unchanged.
    """
    if module_out.channels.shape != module_in.channels.shape:
        raise InvalidShapeError(
            f"shape mismatch {module_out.channels.shape} vs {module_in.channels.shape}"
        )
    return ComplexImage(module_out.channels + module_in.channels)
