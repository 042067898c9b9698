"""Per-frame metric records and their CSV serialisation."""

import csv
from dataclasses import dataclass, field

import numpy as np

from ksora.metrics.emd import emd
from ksora.metrics.scores import auc_judd, cc, pr_curve, pr_thresholds, sim

SCORE_FIELDS = ("cc", "sim", "emd", "auc_j")


@dataclass
class MetricRecord:
    frame_id: str
    cc: float
    sim: float
    emd: float
    auc_j: float
    pr: list = field(default_factory=list)


def evaluate_frame(frame_id, pred, density, fixations, emd_mode="downsampled",
                   n_thresholds=21, auc_negatives="all"):
    """Score one prediction.

    Distribution metrics (CC, SIM, EMD) compare against ``density``; AUC-Judd
    and PR use the binary ``fixations``.  ``density`` may be ``None``, in which
    case the fixation map itself serves as the reference distribution.
    """
    fixations = np.asarray(fixations).astype(bool)
    ref = fixations.astype(np.float64) if density is None else np.asarray(density, dtype=np.float64)
    return MetricRecord(
        frame_id=str(frame_id),
        cc=cc(pred, ref),
        sim=sim(pred, ref),
        emd=emd(pred, ref, mode=emd_mode),
        auc_j=auc_judd(pred, fixations, negatives=auc_negatives),
        pr=pr_curve(pred, fixations, n_thresholds),
    )


def write_metrics_csv(records, path):
    """One row per frame, then a ``mean`` row."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("frame_id",) + SCORE_FIELDS)
        for r in records:
            writer.writerow([r.frame_id] + [repr(getattr(r, k)) for k in SCORE_FIELDS])
        if records:
            means = [float(np.mean([getattr(r, k) for r in records])) for k in SCORE_FIELDS]
            writer.writerow(["mean"] + [repr(m) for m in means])


def write_pr_csv(records, path):
    """PR points per frame plus the per-threshold mean over frames."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("frame_id", "threshold", "precision", "recall"))
        if not records:
            return
        thresholds = pr_thresholds(len(records[0].pr))
        for r in records:
            for t, (p, q) in zip(thresholds, r.pr):
                writer.writerow([r.frame_id, repr(float(t)), repr(p), repr(q)])
        pr = np.array([r.pr for r in records])
        for t, (p, q) in zip(thresholds, pr.mean(axis=0)):
            writer.writerow(["mean", repr(float(t)), repr(float(p)), repr(float(q))])
