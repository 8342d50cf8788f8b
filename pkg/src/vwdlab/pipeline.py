"""Cohort-level glue shared by the command line and the acceptance checks."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .cnn.estimator import DenseNetClassifier
from .cnn.gradcam import average_cam
from .cohort import FlowSeries, Label
from .evaluation.experiment import ExperimentConfig, prepare_cohort
from .features import FEATURE_NAMES
from .segmentation import SegmentationConfig
from .spectral import AblationBand, centered_frequencies


def window_instances(series_list, seg: SegmentationConfig = SegmentationConfig(), ablation: AblationBand | None = None):
    """Instances of every complete window: ``(X, y, patient_ids)``."""
    cfg = ExperimentConfig(model="cnn", input_mode="raw", ablation=ablation, segmentation=seg)
    cohort = prepare_cohort(series_list, cfg)
    xs, ys, ids = [], [], []
    for pid, d in cohort.items():
        rows = d.inputs.reshape(-1, seg.instance_length)
        xs.append(rows)
        ys += [d.label.y] * rows.shape[0]
        ids += [pid] * rows.shape[0]
    X = np.concatenate(xs) if xs else np.zeros((0, seg.instance_length))
    return X, np.array(ys, dtype=np.int64), ids


def feature_rows(series_list, seg: SegmentationConfig = SegmentationConfig(), ablation: AblationBand | None = None):
    """``(rows, n_windows, n_degenerate)``; each row is ``(patient_id, label, values)``."""
    cfg = ExperimentConfig(model="rf", input_mode="features", ablation=ablation, segmentation=seg)
    cohort = prepare_cohort(series_list, cfg)
    rows, total, bad = [], 0, 0
    for pid, d in cohort.items():
        total += d.n_windows
        bad += d.n_degenerate
        rows += [(pid, d.label, v) for v in d.inputs]
    return rows, total, bad


def write_feature_csv(rows, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(FEATURE_NAMES) + ["patient_id", "label"])
        for pid, label, values in rows:
            w.writerow([repr(float(v)) for v in values] + [pid, label.value])
    return path


def read_feature_csv(path):
    """``(X, y, patient_ids)`` from a feature CSV."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != list(FEATURE_NAMES) + ["patient_id", "label"]:
            raise ValueError(f"{path}: unexpected feature header {header}")
        X, y, ids = [], [], []
        for row in reader:
            X.append([float(v) for v in row[: len(FEATURE_NAMES)]])
            ids.append(row[-2])
            y.append(Label(row[-1]).y)
    return np.array(X, dtype=np.float64).reshape(-1, len(FEATURE_NAMES)), np.array(y, dtype=np.int64), ids


def cam_document(model: DenseNetClassifier, X, y, max_per_class: int | None = None) -> dict:
    """Class-averaged Grad-CAM (each class explained by its own logit) as a plain dict."""
    by_class = {}
    for label in (Label.NON_ARDS, Label.ARDS):
        rows = X[y == label.y]
        if max_per_class is not None:
            rows = rows[:max_per_class]
        by_class[label.value] = model.grad_cam(rows, target_class=label.y)
    summaries = average_cam(by_class)
    n = X.shape[1]
    positions = centered_frequencies(n) if model.input_mode == "fft" else np.arange(n, dtype=np.float64)
    return {
        "input_mode": model.input_mode,
        "positions": positions.tolist(),
        "classes": {k: s.to_dict() for k, s in summaries.items()},
    }
