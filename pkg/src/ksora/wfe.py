"""Weighted feature extraction and two-level pyramid fusion.

The weight response of a feature map is computed by pooling each channel to
its mean, convolving the resulting ``(c, 1, 1)`` tensor with a 3x3 layer and a
sigmoid, and replicating the result back to the source resolution.  Because the
pooled tensor has unit spatial extent, only the centre tap of each kernel sees
non-padding input, so the weight map is constant within every channel.
"""

from ksora.errors import DimensionError
from ksora.tensor import (
    as_feature_map,
    conv2d_3x3,
    global_avg_pool,
    pointwise,
    resample,
)


def weight_response(x, p):
    """Per-channel gate in (0, 1), same shape as ``x``."""
    x = as_feature_map(x)
    c, h, w = x.shape
    pooled = global_avg_pool(x).reshape(c, 1, 1)
    gated = conv2d_3x3(pooled, p, activation="sigmoid")
    if gated.shape[0] != c:
        raise DimensionError(f"weight params produce {gated.shape[0]} channels, feature has {c}")
    return resample(gated, h, w, "nearest_up")


def apply_weights(x, w):
    return pointwise(x, w, "mul")


def weight_features(x, p):
    """``x`` multiplied by its own weight response."""
    return apply_weights(x, weight_response(x, p))


def pyramid_fuse(fp, oi, fq, oj):
    """Fuse two pyramid levels into one map at the coarse resolution.

    ``fp`` and ``oi`` are the coarse ``(c, h, w)`` level; ``fq`` and ``oj`` the
    fine ``(c, 2h, 2w)`` level.  The fine pair is summed, mean-pooled by 2 and
    added to the coarse pair.
    """
    fp, oi = as_feature_map(fp, "fp"), as_feature_map(oi, "oi")
    fq, oj = as_feature_map(fq, "fq"), as_feature_map(oj, "oj")
    if fp.shape != oi.shape:
        raise DimensionError(f"coarse level mismatch: fp {fp.shape} vs oi {oi.shape}")
    if fq.shape != oj.shape:
        raise DimensionError(f"fine level mismatch: fq {fq.shape} vs oj {oj.shape}")
    c, h, w = fp.shape
    if fq.shape != (c, 2 * h, 2 * w):
        raise DimensionError(f"fine level must be {(c, 2 * h, 2 * w)}, got {fq.shape}")
    fine = resample(pointwise(fq, oj, "add"), h, w, "avg_down2")
    return pointwise(pointwise(fp, oi, "add"), fine, "add")
