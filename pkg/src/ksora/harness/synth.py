"""Synthetic moving-object scenes with known attention targets.

A scene has static rectangles (distractors), optionally one horizontal mover,
and optionally an object that appears at a later frame.  The designated
attractor of each frame follows simple rules: a newly appeared object beats
the mover, the mover beats static objects, and the first static object is the
fallback.  With no object at all the saliency is a centred blob.

Coarse saliency peaks at 1 on the attractor and stays below 0.35 elsewhere,
so only the attractor's box has pixels above the default threshold.
Static objects are kept out of the mover's lane so their boxes never share
the attractor's saliency blob.
"""

from dataclasses import asdict, dataclass

import numpy as np

from ksora.errors import ConfigurationError
from ksora.harness.bundle import SequenceBundle
from ksora.kos import Proposal

MOVER_CLASS = 7
LATE_CLASS = 9
DISTRACTOR_PEAK = 0.3


@dataclass(frozen=True)
class SceneSpec:
    height: int = 32
    width: int = 32
    frames: int = 10
    n_static: int = 2
    mover: bool = True
    mover_entry: int = 0
    late_frame: int = None
    object_size: int = 6
    noise: float = 6.0
    fixations_per_frame: int = 8

    def validate(self):
        if self.height < 16 or self.width < 16:
            raise ConfigurationError(f"scene must be at least 16x16, got {self.height}x{self.width}")
        if self.frames < 2:
            raise ConfigurationError("scene needs at least 2 frames")
        if not 2 <= self.object_size <= min(self.height, self.width) // 4:
            raise ConfigurationError(f"object_size {self.object_size} does not fit a {self.height}x{self.width} scene")
        if self.n_static < 0 or self.n_static > 4:
            raise ConfigurationError("n_static must be in 0..4")
        if self.late_frame is not None and not 0 < self.late_frame < self.frames:
            raise ConfigurationError(f"late_frame {self.late_frame} outside 1..{self.frames - 1}")
        if not 0 <= self.mover_entry < self.frames:
            raise ConfigurationError(f"mover_entry {self.mover_entry} outside 0..{self.frames - 1}")
        if self.fixations_per_frame < 1:
            raise ConfigurationError("fixations_per_frame must be positive")
        return self


def _blob(h, w, cy, cx, sigma):
    ys = np.arange(h)[:, None] - cy
    xs = np.arange(w)[None, :] - cx
    return np.exp(-(ys * ys + xs * xs) / (2.0 * sigma * sigma))


def _centre(bbox):
    x1, y1, x2, y2 = bbox
    return (y1 + y2 - 1) / 2.0, (x1 + x2 - 1) / 2.0


def _layout(spec, rng):
    """Static boxes in bands above/below the mover lane, clear of its blob."""
    h, w, k = spec.height, spec.width, spec.object_size
    lane_y = (h - k) // 2
    centre = lane_y + (k - 1) / 2.0
    # Rows where the attractor blob (sigma k/2) plus noise can reach 0.45.
    reach = (k / 2.0) * np.sqrt(2.0 * np.log(1.0 / 0.45))
    top_hi = int(np.ceil(centre - reach)) - k
    bot_lo = int(np.floor(centre + reach)) + 1
    bands = [b for b in ((0, top_hi), (bot_lo, h - k)) if b[1] >= b[0]]
    slots = [(band, x) for band in bands for x in range(1, w - k + 1, k + 2)]
    need = spec.n_static + (spec.late_frame is not None)
    if need > len(slots):
        raise ConfigurationError(f"{need} objects do not fit beside the mover lane of a {h}x{w} scene")
    order = rng.permutation(len(slots))
    statics = []
    for idx in order[:spec.n_static]:
        (lo, hi), x = slots[idx]
        y = int(rng.integers(lo, hi + 1))
        statics.append((x, y, x + k, y + k))
    late = None
    if spec.late_frame is not None:
        (lo, _), x = slots[order[spec.n_static]]
        late = (x, lo, x + k, lo + k)
    return statics, lane_y, late


def synth_scene(spec=SceneSpec(), seed=0):
    """Render a :class:`SequenceBundle` with saliency, proposals and ground truth."""
    spec.validate()
    rng = np.random.default_rng(seed)
    h, w, k = spec.height, spec.width, spec.object_size
    statics, lane_y, late = _layout(spec, rng)
    static_classes = list(range(1, len(statics) + 1))
    static_shade = [int(v) for v in rng.integers(120, 170, size=len(statics))]
    x = float(rng.integers(0, w - k + 1))
    vx = float(rng.choice([-2.0, -1.0, 1.0, 2.0]))

    frames, saliency, proposals, fixations, density, attractors = [], [], [], [], [], []
    for t in range(spec.frames):
        img = np.full((h, w), 70.0) + rng.normal(0.0, spec.noise, size=(h, w))
        objs = []
        for cls, box, shade in zip(static_classes, statics, static_shade):
            objs.append((cls, box, shade))
        if spec.mover and t >= spec.mover_entry:
            xi = int(round(x))
            objs.append((MOVER_CLASS, (xi, lane_y, xi + k, lane_y + k), 215))
        if late is not None and t >= spec.late_frame:
            objs.append((LATE_CLASS, late, 185))
        for _, (x1, y1, x2, y2), shade in objs:
            img[y1:y2, x1:x2] = shade + rng.normal(0.0, spec.noise, size=(y2 - y1, x2 - x1))
        frames.append(np.clip(np.rint(img), 0, 255).astype(np.uint8))

        attractor = None
        by_class = {cls: box for cls, box, _ in objs}
        if late is not None and t >= spec.late_frame:
            attractor = LATE_CLASS
        elif MOVER_CLASS in by_class:
            attractor = MOVER_CLASS
        elif static_classes:
            attractor = static_classes[0]
        attractors.append(attractor)

        sigma = k / 2.0
        if attractor is None:
            target = _blob(h, w, (h - 1) / 2.0, (w - 1) / 2.0, min(h, w) / 4.0)
        else:
            target = _blob(h, w, *_centre(by_class[attractor]), sigma)
        sal = target.copy()
        for cls, box, _ in objs:
            if cls != attractor:
                sal = np.maximum(sal, DISTRACTOR_PEAK * _blob(h, w, *_centre(box), sigma))
        sal = np.clip(sal + rng.uniform(0.0, 0.04, size=(h, w)), 0.0, 1.0)
        # Stored maps are float32; keep in-memory values representable.
        saliency.append(sal.astype(np.float32).astype(np.float64))
        density.append(target.astype(np.float32).astype(np.float64))

        p = target.reshape(-1) / target.sum()
        picks = rng.choice(h * w, size=spec.fixations_per_frame, replace=False, p=p)
        fx = np.zeros(h * w, dtype=bool)
        fx[picks] = True
        fixations.append(fx.reshape(h, w))

        proposals.append([
            Proposal(cls, box, round(float(rng.uniform(0.6, 1.0)), 4)) for cls, box, _ in objs
        ])

        if spec.mover and t >= spec.mover_entry:
            x += vx
            if x < 0 or x > w - k:
                vx = -vx
                x = min(max(x, 0.0), float(w - k))

    meta = {"seed": seed, "spec": asdict(spec), "attractors": attractors}
    return SequenceBundle(frames, saliency, proposals, fixations, density, meta).validate()
