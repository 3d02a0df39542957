"""Neural primitives on ``(frames, channels)`` float32 matrices."""

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError

DTYPE = np.float32


@dataclass(frozen=True)
class DepthwiseKernel:
    weights: np.ndarray  # (channels, kernel_size)

    @property
    def kernel_size(self):
        return self.weights.shape[1]

    @property
    def channels(self):
        return self.weights.shape[0]


@dataclass(frozen=True)
class PointwiseKernel:
    weights: np.ndarray  # (out_channels, in_channels)
    bias: np.ndarray  # (out_channels,)


@dataclass(frozen=True)
class BatchNormParams:
    gamma: np.ndarray
    beta: np.ndarray
    running_mean: np.ndarray
    running_var: np.ndarray
    eps: float = 1e-5


@dataclass(frozen=True)
class PReluParams:
    slope: np.ndarray


def _check_channels(x, expected, name):
    if x.ndim != 2 or x.shape[1] != expected:
        raise ShapeError(name, f"(T, {expected})", tuple(x.shape))


def pad_amounts(kernel_size, padding):
    """Zero frames added (left, right) so that output length equals input length."""
    if padding == "same":
        half = (kernel_size - 1) // 2
        return half, half
    if padding == "causal":
        return kernel_size - 1, 0
    raise ValueError(f"unknown padding {padding!r}")


def depthwise_valid(xp, w):
    """Valid-mode depthwise correlation: out[t, c] = sum_j w[c, j] * xp[t + j, c]."""
    k = w.shape[1]
    n = len(xp) - k + 1
    if n <= 0:
        return np.zeros((0, w.shape[0]), dtype=DTYPE)
    wt = w.T.astype(DTYPE, copy=False)
    out = xp[0:n] * wt[0]
    for j in range(1, k):
        out += xp[j:j + n] * wt[j]
    return out


def depthwise_conv1d(x, k, padding="same"):
    x = np.asarray(x, dtype=DTYPE)
    _check_channels(x, k.channels, "depthwise_conv1d input")
    left, right = pad_amounts(k.kernel_size, padding)
    xp = np.pad(x, ((left, right), (0, 0)))
    return depthwise_valid(xp, k.weights)


def pointwise_conv1d(x, k):
    x = np.asarray(x, dtype=DTYPE)
    _check_channels(x, k.weights.shape[1], "pointwise_conv1d input")
    return x @ k.weights.T.astype(DTYPE, copy=False) + k.bias.astype(DTYPE, copy=False)


def batch_norm_infer(x, p):
    x = np.asarray(x, dtype=DTYPE)
    _check_channels(x, len(p.gamma), "batch_norm_infer input")
    scale = (p.gamma / np.sqrt(p.running_var + p.eps)).astype(DTYPE)
    return (x - p.running_mean.astype(DTYPE)) * scale + p.beta.astype(DTYPE)


def fold_batch_norm(k, p):
    """Pointwise kernel equivalent to ``batch_norm_infer(pointwise_conv1d(x, k), p)``."""
    out_ch = k.weights.shape[0]
    if len(p.gamma) != out_ch:
        raise ShapeError("fold_batch_norm", out_ch, len(p.gamma))
    scale = p.gamma.astype(np.float64) / np.sqrt(p.running_var.astype(np.float64) + p.eps)
    w = k.weights.astype(np.float64) * scale[:, None]
    b = (k.bias.astype(np.float64) - p.running_mean) * scale + p.beta
    return PointwiseKernel(w.astype(DTYPE), b.astype(DTYPE))


def prelu(x, p):
    x = np.asarray(x, dtype=DTYPE)
    _check_channels(x, len(p.slope), "prelu input")
    return np.where(x >= 0, x, x * p.slope.astype(DTYPE))


def mfm(x):
    """Max feature map: elementwise max of the two channel halves."""
    x = np.asarray(x, dtype=DTYPE)
    if x.ndim != 2 or x.shape[1] % 2:
        raise ShapeError("mfm input", "an even channel count", tuple(x.shape))
    half = x.shape[1] // 2
    return np.maximum(x[:, :half], x[:, half:])


def max_pool1d(x, kernel=2, stride=2):
    if kernel != 2 or stride != 2:
        raise ValueError("only kernel=2, stride=2 is supported")
    x = np.asarray(x, dtype=DTYPE)
    n = len(x) // 2
    return np.maximum(x[0:2 * n:2], x[1:2 * n:2])


def time_mask(x, spans):
    """Zero the frames covered by each ``(start, length)`` span."""
    out = np.array(x, dtype=DTYPE, copy=True)
    for start, length in spans:
        out[max(start, 0):max(start + length, 0)] = 0
    return out
