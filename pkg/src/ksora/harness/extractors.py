"""Seeded stand-ins for the object and motion backbones.

Each extractor is a plain stack of 3x3 ReLU convolutions: ``depth`` layers at
frame resolution, a 2x2 mean-pool, then ``depth`` layers at half resolution.
Layers are numbered from 1; the fine tap must come from the first half and the
coarse tap from the second, which guarantees the 2x shape relation the pyramid
fusion needs.

Anything with the same call signature (returning ``(fine, coarse)`` feature
maps) can replace them, e.g. features loaded from files.
"""

import numpy as np

from ksora.errors import ConfigurationError, DimensionError
from ksora.tensor import ConvParams, conv2d_3x3, resample


class ToyExtractor:
    def __init__(self, in_channels, channels, depth, fine_tap, coarse_tap, rng):
        if not 1 <= fine_tap <= depth < coarse_tap <= 2 * depth:
            raise ConfigurationError(
                f"taps ({fine_tap}, {coarse_tap}) incompatible with depth {depth}"
            )
        self.in_channels = in_channels
        self.depth = depth
        self.fine_tap = fine_tap
        self.coarse_tap = coarse_tap
        self.layers = []
        c_in = in_channels
        for _ in range(2 * depth):
            self.layers.append(ConvParams.random(c_in, channels, rng))
            c_in = channels

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        _, h, w = x.shape
        if h % 2 or w % 2:
            raise DimensionError(f"extractor input must have even dims, got {h}x{w}")
        taps = {}
        for n, p in enumerate(self.layers, start=1):
            if n == self.depth + 1:
                x = resample(x, h // 2, w // 2, "avg_down2")
            x = conv2d_3x3(x, p, activation="relu")
            taps[n] = x
        return taps[self.fine_tap], taps[self.coarse_tap]


def object_input(frame):
    """One channel: luminance scaled to [0, 1]."""
    return (np.asarray(frame, dtype=np.float64) / 255.0)[None]


def motion_input(prev_frame, frame):
    """Three channels: previous frame, current frame, and their difference."""
    a = np.asarray(prev_frame, dtype=np.float64) / 255.0
    b = np.asarray(frame, dtype=np.float64) / 255.0
    return np.stack([a, b, b - a])
