"""Patient-level aggregation and the AUC / confusion metric suite."""

from __future__ import annotations

import math

import numpy as np

from ..errors import NoWindows, SingleClass

METRICS = ("auc", "accuracy", "sensitivity", "specificity", "ppv", "npv")


def patient_score(window_labels) -> float:
    """Fraction of a patient's windows labelled ARDS."""
    w = np.asarray(window_labels, dtype=np.float64).ravel()
    if w.size == 0:
        raise NoWindows("patient has no breath windows")
    return float((w > 0.5).sum() / w.size)


def patient_label(score: float) -> int:
    """ARDS only when strictly more than half of the windows are ARDS."""
    return int(score > 0.5)


def roc_auc(scores, labels) -> float:
    """Mann-Whitney AUC: P(pos > neg) + P(pos == neg) / 2 over all pos/neg pairs.

    The numerator is an exact integer count, so the result is a single rounding of a rational.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels).astype(np.int64)
    pos, neg = s[y == 1], np.sort(s[y == 0])
    if pos.size == 0 or neg.size == 0:
        raise SingleClass("AUC needs at least one patient of each class")
    lo = np.searchsorted(neg, pos, side="left")
    hi = np.searchsorted(neg, pos, side="right")
    twice = int(2 * lo.sum() + (hi - lo).sum())
    return twice / (2 * pos.size * neg.size)


def roc_curve(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    """ROC points (fpr, tpr) for thresholds at every distinct score, from (0,0) to (1,1)."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels).astype(np.int64)
    n_pos, n_neg = int((y == 1).sum()), int((y == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise SingleClass("ROC needs both classes")
    thresholds = np.unique(s)[::-1]
    tpr = [0.0] + [float(((s >= t) & (y == 1)).sum() / n_pos) for t in thresholds]
    fpr = [0.0] + [float(((s >= t) & (y == 0)).sum() / n_neg) for t in thresholds]
    return np.array(fpr), np.array(tpr)


def interpolate_roc(fpr, tpr, grid) -> np.ndarray:
    """TPR on ``grid`` taking the upper envelope at vertical steps."""
    fpr, tpr = np.asarray(fpr), np.asarray(tpr)
    out = np.empty(len(grid))
    for i, g in enumerate(grid):
        out[i] = tpr[fpr <= g + 1e-12].max()
    return out


def _ratio(num: int, den: int) -> float:
    return num / den if den else math.nan


def confusion_metrics(pred, true) -> dict:
    """Accuracy, sensitivity, specificity, PPV and NPV; undefined ratios are NaN."""
    p = np.asarray(pred).astype(np.int64)
    t = np.asarray(true).astype(np.int64)
    tp = int(((p == 1) & (t == 1)).sum())
    tn = int(((p == 0) & (t == 0)).sum())
    fp = int(((p == 1) & (t == 0)).sum())
    fn = int(((p == 0) & (t == 1)).sum())
    return {
        "accuracy": _ratio(tp + tn, t.size),
        "sensitivity": _ratio(tp, tp + fn),
        "specificity": _ratio(tn, tn + fp),
        "ppv": _ratio(tp, tp + fp),
        "npv": _ratio(tn, tn + fn),
    }


def patient_metrics(scores: dict, labels: dict) -> dict:
    """The full metric suite from per-patient scores and true labels (both keyed by id)."""
    ids = sorted(scores)
    s = np.array([scores[i] for i in ids])
    y = np.array([labels[i] for i in ids], dtype=np.int64)
    out = {"auc": roc_auc(s, y)}
    out.update(confusion_metrics([patient_label(v) for v in s], y))
    return out
