"""Evaluation suite for predicted saliency maps."""

from ksora.metrics.batch import (
    MetricRecord,
    evaluate_frame,
    write_metrics_csv,
    write_pr_csv,
)
from ksora.metrics.emd import emd, pool_to_grid, transport_cost
from ksora.metrics.scores import auc_judd, cc, pr_curve, pr_thresholds, roc_judd, sim

__all__ = [
    "MetricRecord",
    "auc_judd",
    "cc",
    "emd",
    "evaluate_frame",
    "pool_to_grid",
    "pr_curve",
    "pr_thresholds",
    "roc_judd",
    "sim",
    "transport_cost",
    "write_metrics_csv",
    "write_pr_csv",
]
