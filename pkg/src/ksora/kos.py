"""Key object selection.

Object classes are ranked by how much coarse saliency their boxes collected
over the previous frames.  Current-frame proposals are then scored against that
ranking, the best one is contrast-stretched in place, and the augmented frame is
handed to the object feature extractor.  With no ranking available the frame is
instead weighted by a centred Gaussian prior.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from ksora.errors import ConfigurationError, DimensionError

log = logging.getLogger(__name__)

BRANCH_CENTER_PRIOR = "center_prior"
BRANCH_ROI = "roi"


@dataclass(frozen=True)
class Proposal:
    """One detection box; ``bbox`` is half-open ``(x1, y1, x2, y2)`` in pixels."""

    class_id: int
    bbox: tuple
    det_conf: float = 1.0

    def __post_init__(self):
        x1, y1, x2, y2 = (int(v) for v in self.bbox)
        if x2 <= x1 or y2 <= y1:
            raise ConfigurationError(f"degenerate bbox {self.bbox}")
        if not 0.0 <= self.det_conf <= 1.0:
            raise ConfigurationError(f"det_conf {self.det_conf} outside [0, 1]")
        object.__setattr__(self, "bbox", (x1, y1, x2, y2))
        object.__setattr__(self, "class_id", int(self.class_id))
        object.__setattr__(self, "det_conf", float(self.det_conf))

    def inside(self, height, width):
        x1, y1, x2, y2 = self.bbox
        return x1 >= 0 and y1 >= 0 and x2 <= width and y2 <= height

    def clipped(self, height, width):
        """Copy with the box clipped to the frame, or ``None`` if nothing is left."""
        x1, y1, x2, y2 = self.bbox
        x1, x2 = max(x1, 0), min(x2, width)
        y1, y2 = max(y1, 0), min(y2, height)
        if x2 <= x1 or y2 <= y1:
            return None
        return Proposal(self.class_id, (x1, y1, x2, y2), self.det_conf)


@dataclass(frozen=True)
class GlobalRanking:
    """Classes ordered best first (``gsc``) with their average confidence (``gss``)."""

    gsc: tuple = ()
    gss: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.gsc)

    def __contains__(self, class_id):
        return class_id in self.gss

    def rank(self, class_id):
        """1-based position of ``class_id`` in the ranking."""
        return self.gsc.index(class_id) + 1

    def to_json(self):
        return [
            {"class": c, "rank": r, "gss": self.gss[c]}
            for r, c in enumerate(self.gsc, start=1)
        ]


@dataclass(frozen=True)
class EnhanceRanges:
    """Input range ``[in_lo, in_hi]`` remapped onto ``[out_lo, out_hi]``."""

    in_lo: float
    in_hi: float
    out_lo: float = 0.0
    out_hi: float = 255.0

    def __post_init__(self):
        vals = (self.in_lo, self.in_hi, self.out_lo, self.out_hi)
        if any(not 0.0 <= v <= 255.0 for v in vals):
            raise ConfigurationError(f"enhance ranges must lie in [0, 255]: {vals}")
        if self.in_hi <= self.in_lo:
            raise ConfigurationError(f"degenerate input range [{self.in_lo}, {self.in_hi}]")
        if self.out_hi <= self.out_lo:
            raise ConfigurationError(f"degenerate output range [{self.out_lo}, {self.out_hi}]")


@dataclass(frozen=True)
class KOSParams:
    """Selection parameters.

    ``ranges`` of ``None`` means a percentile contrast stretch computed from
    each roi (``pct_lo``/``pct_hi`` onto ``out_lo``/``out_hi``).
    """

    tau: float = 0.5
    normalize: bool = False
    ranges: EnhanceRanges = None
    pct_lo: float = 2.0
    pct_hi: float = 98.0
    out_lo: float = 0.0
    out_hi: float = 255.0
    sigma_x_frac: float = 1.0 / 3.0
    sigma_y_frac: float = 1.0 / 3.0

    def __post_init__(self):
        if not 0.0 < self.tau < 1.0:
            raise ConfigurationError(f"tau {self.tau} outside (0, 1)")
        if not 0.0 <= self.pct_lo < self.pct_hi <= 100.0:
            raise ConfigurationError(f"bad percentiles {self.pct_lo}, {self.pct_hi}")
        if self.sigma_x_frac <= 0 or self.sigma_y_frac <= 0:
            raise ConfigurationError("gaussian sigma fractions must be positive")


@dataclass
class RoiReport:
    branch: str
    frame: int = None
    index: int = None
    class_id: int = None
    bbox: tuple = None
    score: float = None
    flags: list = field(default_factory=list)

    def to_json(self):
        return {
            "frame": self.frame,
            "branch": self.branch,
            "index": self.index,
            "class": self.class_id,
            "bbox": list(self.bbox) if self.bbox is not None else None,
            "score": self.score,
            "flags": list(self.flags),
        }


def overlap_confidence(s, bbox, tau, normalize=False):
    """Number of pixels inside ``bbox`` whose saliency is at least ``tau``.

    With ``normalize`` the count is divided by the box area.
    """
    x1, y1, x2, y2 = bbox
    patch = np.asarray(s)[y1:y2, x1:x2]
    count = int(np.count_nonzero(patch >= tau))
    if normalize:
        return count / float((x2 - x1) * (y2 - y1))
    return float(count)


def global_ranking(history, tau, normalize=False):
    """Rank classes over ``history``, a sequence of ``(saliency, proposals)``.

    Totals per class are divided by the number of history frames and sorted
    descending; ties keep first-seen order.
    """
    totals = {}
    n_frames = 0
    for s, proposals in history:
        n_frames += 1
        for prop in proposals:
            conf = overlap_confidence(s, prop.bbox, tau, normalize)
            totals[prop.class_id] = totals.get(prop.class_id, 0.0) + conf
    if n_frames == 0:
        return GlobalRanking()
    gss = {c: v / n_frames for c, v in totals.items()}
    gsc = tuple(sorted(gss, key=lambda c: -gss[c]))
    return GlobalRanking(gsc, gss)


def proposal_score(conf, class_id, ranking, flags=None):
    if class_id in ranking:
        avg = ranking.gss[class_id]
        if avg == 0.0:
            if flags is not None:
                flags.append(f"zero_gss:{class_id}")
            log.debug("class %s has zero average confidence; ratio term dropped", class_id)
            return conf
        return conf * (1.0 + (conf / avg) * (1.0 / ranking.rank(class_id)))
    return conf * 2.0


def score_proposals(proposals, s, ranking, tau, normalize=False, flags=None):
    """Score every proposal; returns ``(index, score)`` best first.

    Known classes are scored ``c * (1 + c / gss / rank)``; unseen classes get
    ``2 * c``.  Ties go to the lower proposal index.
    """
    scored = []
    for i, prop in enumerate(proposals):
        conf = overlap_confidence(s, prop.bbox, tau, normalize)
        scored.append((i, proposal_score(conf, prop.class_id, ranking, flags)))
    scored.sort(key=lambda item: -item[1])
    return scored


def auto_ranges(roi, params):
    """Percentile stretch for ``roi``; falls back to the full range on flat patches."""
    lo, hi = np.percentile(roi, [params.pct_lo, params.pct_hi])
    if hi <= lo:
        lo, hi = 0.0, 255.0
    return EnhanceRanges(float(lo), float(hi), params.out_lo, params.out_hi)


def kappa_enhance(roi, r):
    """Linear contrast/brightness remap of an 8-bit patch."""
    roi = np.asarray(roi)
    if roi.size and (roi.min() < 0 or roi.max() > 255):
        raise ConfigurationError("roi values outside [0, 255]")
    unit = np.clip((roi.astype(np.float64) - r.in_lo) / (r.in_hi - r.in_lo), 0.0, 1.0)
    out = np.rint(unit * (r.out_hi - r.out_lo) + r.out_lo)
    return np.clip(out, r.out_lo, r.out_hi).astype(np.uint8)


def center_prior_mask(height, width, sigma_x_frac=1.0 / 3.0, sigma_y_frac=1.0 / 3.0):
    """Centred 2-D Gaussian with peak 1 and sigma proportional to frame size."""
    ys = np.arange(height) - (height - 1) / 2.0
    xs = np.arange(width) - (width - 1) / 2.0
    sy, sx = sigma_y_frac * height, sigma_x_frac * width
    return np.exp(-(ys[:, None] ** 2) / (2 * sy * sy) - (xs[None, :] ** 2) / (2 * sx * sx))


def apply_center_prior(f, params):
    mask = center_prior_mask(f.shape[0], f.shape[1], params.sigma_x_frac, params.sigma_y_frac)
    return np.clip(np.rint(f.astype(np.float64) * mask), 0, 255).astype(np.uint8)


def select_and_augment(f, s, proposals, ranking, params=KOSParams(), frame=None):
    """Pick the key salient object and return ``(augmented_frame, RoiReport)``.

    Pixels outside the selected box are copied unchanged.
    """
    f = np.asarray(f)
    s = np.asarray(s)
    if f.ndim != 2 or f.shape != s.shape:
        raise DimensionError(f"frame {f.shape} and saliency {s.shape} must be equal 2-D grids")
    if len(ranking) == 0 or not proposals:
        report = RoiReport(BRANCH_CENTER_PRIOR, frame=frame)
        if len(ranking) and not proposals:
            report.flags.append("no_proposals")
        return apply_center_prior(f, params), report

    flags = []
    scored = score_proposals(proposals, s, ranking, params.tau, params.normalize, flags)
    best, best_score = scored[0]
    prop = proposals[best]
    x1, y1, x2, y2 = prop.bbox
    roi = f[y1:y2, x1:x2]
    ranges = params.ranges if params.ranges is not None else auto_ranges(roi, params)
    out = f.copy()
    out[y1:y2, x1:x2] = kappa_enhance(roi, ranges)
    report = RoiReport(
        BRANCH_ROI,
        frame=frame,
        index=best,
        class_id=prop.class_id,
        bbox=prop.bbox,
        score=best_score,
        flags=flags,
    )
    return out, report
