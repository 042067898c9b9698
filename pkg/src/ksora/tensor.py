"""Dense feature-map substrate.

A feature map is a float64 ``numpy.ndarray`` of shape ``(channels, height,
width)``.  Every operation here is a pure function returning a new array; none
mutates its arguments.
"""

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from ksora.errors import ConfigurationError, DimensionError

ACTIVATIONS = ("sigmoid", "relu", "none")
RESAMPLE_MODES = ("nearest_up", "avg_down2")


def as_feature_map(x, name="x"):
    """Validate ``x`` as a finite rank-3 array and return it as float64."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 3 or min(arr.shape) < 1:
        raise DimensionError(f"{name}: expected (channels, height, width), got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DimensionError(f"{name}: contains non-finite values")
    return arr


@dataclass(frozen=True, eq=False)
class ConvParams:
    """Weights of a same-size 3x3 convolution.

    ``kernels`` has shape ``(out_channels, in_channels, 3, 3)`` and ``bias``
    shape ``(out_channels,)``.
    """

    kernels: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        k = np.asarray(self.kernels, dtype=np.float64)
        b = np.asarray(self.bias, dtype=np.float64).reshape(-1)
        if k.ndim != 4 or k.shape[2:] != (3, 3):
            raise ConfigurationError(f"kernels must be (out, in, 3, 3), got {k.shape}")
        if b.shape[0] != k.shape[0]:
            raise ConfigurationError(
                f"kernel count {k.shape[0]} != bias count {b.shape[0]}"
            )
        object.__setattr__(self, "kernels", k)
        object.__setattr__(self, "bias", b)

    @property
    def out_channels(self):
        return self.kernels.shape[0]

    @property
    def in_channels(self):
        return self.kernels.shape[1]

    @classmethod
    def identity(cls, channels):
        k = np.zeros((channels, channels, 3, 3))
        k[np.arange(channels), np.arange(channels), 1, 1] = 1.0
        return cls(k, np.zeros(channels))

    @classmethod
    def random(cls, in_channels, out_channels, rng, scale=None):
        """He-style normal init; ``scale`` overrides the standard deviation."""
        if scale is None:
            scale = np.sqrt(2.0 / (9 * in_channels))
        k = rng.normal(0.0, scale, size=(out_channels, in_channels, 3, 3))
        b = rng.normal(0.0, 0.1, size=out_channels)
        return cls(k, b)


def global_avg_pool(x):
    """Mean of each channel over its ``h*w`` entries; returns shape ``(c,)``."""
    x = as_feature_map(x)
    c, h, w = x.shape
    return x.reshape(c, h * w).sum(axis=1, dtype=np.float64) / (h * w)


def _windows(x):
    padded = np.pad(x, ((0, 0), (1, 1), (1, 1)))
    # (in, h, w, 3, 3)
    return sliding_window_view(padded, (3, 3), axis=(1, 2))


def correlate3x3(x, kernels):
    """Bias-free same-size 3x3 cross-correlation with zero padding 1.

    ``x`` is ``(in, h, w)``, ``kernels`` is ``(out, in, 3, 3)``.
    """
    if kernels.shape[1] != x.shape[0]:
        raise ConfigurationError(
            f"kernels expect {kernels.shape[1]} input channels, input has {x.shape[0]}"
        )
    return np.einsum("oiab,ihwab->ohw", kernels, _windows(x), optimize=True)


def correlate3x3_grad_kernels(x, grad_out):
    """Gradient of ``sum(grad_out * correlate3x3(x, K))`` with respect to ``K``."""
    return np.einsum("ohw,ihwab->oiab", grad_out, _windows(x), optimize=True)


def correlate3x3_grad_input(grad_out, kernels):
    """Gradient of ``sum(grad_out * correlate3x3(x, K))`` with respect to ``x``."""
    flipped = kernels.transpose(1, 0, 2, 3)[:, :, ::-1, ::-1]
    return correlate3x3(grad_out, np.ascontiguousarray(flipped))


def activate(z, activation):
    if activation == "sigmoid":
        return expit(z)
    if activation == "relu":
        return np.maximum(z, 0.0)
    if activation == "none":
        return z
    raise ConfigurationError(f"unknown activation {activation!r}; expected one of {ACTIVATIONS}")


def conv2d_3x3(x, p, activation="none"):
    """3x3 convolution layer ``activation(K * x + b)`` preserving spatial size."""
    x = as_feature_map(x)
    if p.in_channels != x.shape[0]:
        raise ConfigurationError(
            f"conv params expect {p.in_channels} input channels, input has {x.shape[0]}"
        )
    z = correlate3x3(x, p.kernels) + p.bias[:, None, None]
    return activate(z, activation)


def resample(x, target_h, target_w, mode):
    """Nearest-neighbour upsampling or 2x2 mean-pool downsampling."""
    x = as_feature_map(x)
    c, h, w = x.shape
    if mode == "nearest_up":
        if target_h < h or target_w < w:
            raise DimensionError(f"nearest_up target {target_h}x{target_w} smaller than source {h}x{w}")
        rows = (np.arange(target_h) * h) // target_h
        cols = (np.arange(target_w) * w) // target_w
        return x[:, rows[:, None], cols[None, :]]
    if mode == "avg_down2":
        if h % 2 or w % 2 or target_h * 2 != h or target_w * 2 != w:
            raise DimensionError(
                f"avg_down2 needs even source dims and target == source/2; got {h}x{w} -> {target_h}x{target_w}"
            )
        return x.reshape(c, target_h, 2, target_w, 2).mean(axis=(2, 4))
    raise ConfigurationError(f"unknown resample mode {mode!r}; expected one of {RESAMPLE_MODES}")


def pointwise(a, b, op):
    """Elementwise ``mul`` or ``add`` of two equally shaped maps."""
    a = as_feature_map(a, "a")
    b = as_feature_map(b, "b")
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch {a.shape} vs {b.shape}")
    if op == "mul":
        return a * b
    if op == "add":
        return a + b
    raise ConfigurationError(f"unknown pointwise op {op!r}")
