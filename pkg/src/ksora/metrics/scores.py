"""Saliency-map scores: CC, SIM, AUC-Judd and precision/recall curves.

Undefined cases (constant maps, zero mass, no fixations) raise
:class:`~ksora.errors.UndefinedMetricError` instead of returning a silent 0.
"""

import numpy as np

from ksora.errors import DimensionError, UndefinedMetricError


def _pair(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch {a.shape} vs {b.shape}")
    return a.reshape(-1), b.reshape(-1)


def cc(a, b):
    """Pearson correlation of two maps.

    If exactly one map is constant the covariance is zero and 0.0 is returned.
    """
    a, b = _pair(a, b)
    da = a - a.mean()
    db = b - b.mean()
    na = np.sqrt(np.dot(da, da))
    nb = np.sqrt(np.dot(db, db))
    if na == 0 and nb == 0:
        raise UndefinedMetricError("CC undefined: both maps are constant")
    if na == 0 or nb == 0:
        return 0.0
    return float(np.clip(np.dot(da, db) / (na * nb), -1.0, 1.0))


def sim(a, b):
    """Histogram intersection of the two maps after normalising each to unit sum."""
    a, b = _pair(a, b)
    if np.any(a < 0) or np.any(b < 0):
        raise UndefinedMetricError("SIM undefined for negative values")
    sa, sb = a.sum(), b.sum()
    if sa <= 0 or sb <= 0:
        raise UndefinedMetricError("SIM undefined: zero-sum map")
    return float(np.minimum(a / sa, b / sb).sum())


def _fixations(fx, shape):
    fx = np.asarray(fx)
    if fx.shape != shape:
        raise DimensionError(f"fixation map {fx.shape} vs saliency {shape}")
    mask = fx.astype(bool)
    if not mask.any():
        raise UndefinedMetricError("no fixations")
    return mask


def roc_judd(s, fx, negatives="all"):
    """ROC points (fpr, tpr) with thresholds at the fixated saliency values.

    ``negatives="all"`` measures the false-positive rate over every pixel;
    ``"nonfixated"`` over the non-fixated pixels only (the MIT benchmark form).
    """
    s = np.asarray(s, dtype=np.float64)
    mask = _fixations(fx, s.shape)
    flat = s.reshape(-1)
    at_fix = s[mask]
    n_fix = at_fix.size
    thresholds = np.unique(at_fix)[::-1]
    tp = np.searchsorted(np.sort(at_fix), thresholds, side="left")
    tp = n_fix - tp
    above = flat.size - np.searchsorted(np.sort(flat), thresholds, side="left")
    if negatives == "all":
        fp = above / flat.size
    elif negatives == "nonfixated":
        n_neg = flat.size - n_fix
        fp = (above - tp) / n_neg if n_neg else np.zeros_like(thresholds)
    else:
        raise ValueError(f"unknown negatives mode {negatives!r}")
    fpr = np.concatenate(([0.0], fp, [1.0]))
    tpr = np.concatenate(([0.0], tp / n_fix, [1.0]))
    return fpr, tpr


def auc_judd(s, fx, negatives="all"):
    """Trapezoidal area under :func:`roc_judd`."""
    fpr, tpr = roc_judd(s, fx, negatives)
    return float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))


def pr_thresholds(n_thresholds=21):
    if n_thresholds < 2:
        raise ValueError("need at least two thresholds")
    return np.linspace(0.0, 1.0, n_thresholds)


def pr_curve(s, gt, n_thresholds=21):
    """Precision/recall of ``s >= t`` against ``gt`` at :func:`pr_thresholds`.

    Returns a list of ``(precision, recall)``, one per threshold in increasing
    order.  A threshold with no predicted positives records precision 1.0.
    """
    s = np.asarray(s, dtype=np.float64)
    mask = _fixations(gt, s.shape)
    n_pos = mask.sum()
    points = []
    for t in pr_thresholds(n_thresholds):
        pred = s >= t
        tp = np.count_nonzero(pred & mask)
        n_pred = np.count_nonzero(pred)
        precision = tp / n_pred if n_pred else 1.0
        points.append((float(precision), float(tp / n_pos)))
    return points
