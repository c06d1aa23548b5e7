"""Classification metrics over scored users.

Predictions use the rule ``score >= threshold``.  Curve sweeps visit each
distinct score as a threshold, from highest to lowest, so tied scores enter
together; the resulting trapezoidal area under the ROC curve equals the
pairwise ranking statistic with ties counted half.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .errors import EmptyInputError, UndefinedMetricError

__all__ = [
    "ScoredLabel",
    "CurvePoint",
    "ThresholdMetrics",
    "threshold_metrics",
    "roc_auc",
    "pr_aupr",
    "write_curve_points",
]


@dataclass(frozen=True)
class ScoredLabel:
    """A user's predicted probability paired with the true label."""

    score: float
    label: int

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score must be in [0, 1], got {self.score}")
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label}")


@dataclass(frozen=True)
class CurvePoint:
    """One sweep point: coordinates plus the threshold that produced them."""

    x: float
    y: float
    threshold: float


@dataclass(frozen=True)
class ThresholdMetrics:
    accuracy: float
    precision: float
    recall: float
    f_score: float


def _to_arrays(scored):
    scored = list(scored)
    if not scored:
        raise EmptyInputError("metrics need at least one scored label")
    scores = np.array([item.score for item in scored], dtype=float)
    labels = np.array([item.label for item in scored], dtype=np.int64)
    return scores, labels


def threshold_metrics(scored, threshold=0.5):
    """Accuracy, precision, recall, and F score at one threshold.

    Precision is 0 when nothing is predicted positive, recall is 0 when
    there are no positives, and the F score is 0 when precision and recall
    are both 0, so every value is always defined.
    """
    scores, labels = _to_arrays(scored)
    predicted = scores >= threshold
    tp = int(np.sum(predicted & (labels == 1)))
    fp = int(np.sum(predicted & (labels == 0)))
    fn = int(np.sum(~predicted & (labels == 1)))
    tn = int(np.sum(~predicted & (labels == 0)))
    accuracy = (tp + tn) / len(labels)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f_score = 2.0 * precision * recall / (precision + recall) if precision + recall else 0.0
    return ThresholdMetrics(accuracy, precision, recall, f_score)


def _sweep(scores, labels):
    """Cumulative true/false positives after each distinct score, descending."""
    order = np.argsort(-scores, kind="stable")
    s_sorted = scores[order]
    l_sorted = labels[order]
    boundaries = np.flatnonzero(np.diff(s_sorted) != 0)
    ends = np.concatenate([boundaries, [len(s_sorted) - 1]])
    tp_cum = np.cumsum(l_sorted)[ends]
    fp_cum = np.cumsum(1 - l_sorted)[ends]
    return s_sorted[ends], tp_cum, fp_cum


def roc_auc(scored):
    """Area under the ROC curve with its sweep points.

    Points are ``(false positive rate, true positive rate)`` per distinct
    threshold; an anchor at the origin (threshold infinity) completes the
    curve.  Needs both classes present.
    """
    scores, labels = _to_arrays(scored)
    n_pos = int(np.sum(labels == 1))
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("ROC needs at least one positive and one negative label")
    thresholds, tp_cum, fp_cum = _sweep(scores, labels)
    points = [CurvePoint(0.0, 0.0, float("inf"))]
    points.extend(
        CurvePoint(fp / n_neg, tp / n_pos, float(t))
        for t, tp, fp in zip(thresholds, tp_cum, fp_cum)
    )
    area = 0.0
    for prev, cur in zip(points[:-1], points[1:]):
        area += (cur.x - prev.x) * (cur.y + prev.y) / 2.0
    return float(area), points


def pr_aupr(scored):
    """Average precision with the precision-recall sweep points.

    Points are ``(recall, precision)`` per distinct threshold; the area sums
    precision times the recall gained at each step.  Needs at least one
    positive label.
    """
    scores, labels = _to_arrays(scored)
    n_pos = int(np.sum(labels == 1))
    if n_pos == 0:
        raise UndefinedMetricError("precision-recall needs at least one positive label")
    thresholds, tp_cum, fp_cum = _sweep(scores, labels)
    points = []
    area = 0.0
    prev_recall = 0.0
    for t, tp, fp in zip(thresholds, tp_cum, fp_cum):
        recall = tp / n_pos
        precision = tp / (tp + fp)
        points.append(CurvePoint(float(recall), float(precision), float(t)))
        area += (recall - prev_recall) * precision
        prev_recall = recall
    return float(area), points


def write_curve_points(points, path):
    """Write sweep points as CSV with columns ``threshold,x,y``."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["threshold", "x", "y"])
        for point in points:
            writer.writerow([repr(point.threshold), repr(point.x), repr(point.y)])
