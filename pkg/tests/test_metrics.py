import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vwdlab.cnn.training import window_probability
from vwdlab.errors import NoWindows, SingleClass
from vwdlab.evaluation.metrics import (
    confusion_metrics,
    interpolate_roc,
    patient_label,
    patient_metrics,
    patient_score,
    roc_auc,
    roc_curve,
)
from vwdlab.stats import t_interval


def pair_count_auc(s, y):
    pos = [a for a, l in zip(s, y) if l == 1]
    neg = [a for a, l in zip(s, y) if l == 0]
    total = 0.0
    for a in pos:
        for b in neg:
            total += 1.0 if a > b else 0.5 if a == b else 0.0
    return total / (len(pos) * len(neg))


def test_patient_score_examples():
    assert patient_score([1, 1, 0]) == pytest.approx(2 / 3)
    assert patient_label(patient_score([1, 1, 0])) == 1
    assert patient_score([1, 0]) == 0.5
    assert patient_label(0.5) == 0
    with pytest.raises(NoWindows):
        patient_score([])


def test_window_then_patient_aggregation():
    probs = np.array([[0.9] * 20, [1.0] * 10 + [0.0] * 10, [0.2] * 20])
    windows = [window_probability(p) for p in probs]
    assert windows[0] == pytest.approx(0.9)
    assert windows[1] == 0.5
    # the tied window counts as non-ARDS, leaving 1 of 3
    assert patient_score(windows) == pytest.approx(1 / 3)


@given(st.lists(st.lists(st.floats(0, 1), min_size=1, max_size=20), min_size=1, max_size=12))
def test_aggregation_oracle(windows):
    probs = [sum(w) / len(w) for w in windows]
    assert [window_probability(w) for w in windows] == pytest.approx(probs, abs=1e-12)
    oracle = sum(1 for p in probs if p > 0.5) / len(probs)
    got = patient_score([window_probability(w) for w in windows])
    # strict rule: a window exactly at 0.5 never counts
    assert got == pytest.approx(oracle, abs=1 / len(probs)) if any(abs(p - 0.5) < 1e-12 for p in probs) else got == oracle
    assert patient_label(got) == int(got > 0.5)


def test_auc_examples():
    assert roc_auc([0.9, 0.8, 0.2, 0.4], [1, 1, 0, 0]) == 1.0
    assert roc_auc([0.3] * 6, [1, 0, 1, 0, 1, 0]) == 0.5
    with pytest.raises(SingleClass):
        roc_auc([0.1, 0.2], [1, 1])


def test_auc_random_vectors_exact(rng):
    for _ in range(100):
        n = 20
        y = np.array([0, 1] * (n // 2))
        rng.shuffle(y)
        s = np.round(rng.random(n), 1)
        assert roc_auc(s, y) == pair_count_auc(s.tolist(), y.tolist())


@given(
    st.lists(st.tuples(st.integers(-50, 50), st.integers(0, 1)), min_size=2, max_size=30),
)
def test_auc_monotone_invariance(pairs):
    # integer scores keep the transforms strictly monotone in floating point
    s = np.array([p[0] for p in pairs], dtype=float)
    y = np.array([p[1] for p in pairs])
    if len(set(y.tolist())) < 2:
        return
    base = roc_auc(s, y)
    assert base == pytest.approx(pair_count_auc(s.tolist(), y.tolist()), abs=1e-15)
    assert roc_auc(np.exp(s / 10), y) == base
    assert roc_auc(s**3 + 5 * s, y) == base
    assert roc_auc(-1.0 / (60 + s), y) == base


def test_roc_curve_area_matches_auc(rng):
    s = rng.random(30)
    y = np.array([0, 1] * 15)
    fpr, tpr = roc_curve(s, y)
    assert fpr[0] == 0 and tpr[-1] == 1 and fpr[-1] == 1
    assert np.trapezoid(tpr, fpr) == pytest.approx(roc_auc(s, y))
    grid = np.linspace(0, 1, 11)
    interp = interpolate_roc(fpr, tpr, grid)
    assert np.all(np.diff(interp) >= 0) and interp[-1] == 1


def test_confusion_examples():
    m = confusion_metrics([1, 1, 0, 0], [1, 0, 1, 0])
    assert all(v == 0.5 for v in m.values())
    m = confusion_metrics([1, 0, 1], [1, 0, 1])
    assert all(v == 1.0 for v in m.values())
    m = confusion_metrics([0, 0], [0, 0])
    assert math.isnan(m["sensitivity"]) and math.isnan(m["ppv"]) and m["specificity"] == 1.0


def test_confusion_random_oracle(rng):
    p = rng.integers(0, 2, 50)
    t = rng.integers(0, 2, 50)
    table = np.zeros((2, 2), dtype=int)
    for a, b in zip(p, t):
        table[b, a] += 1
    (tn, fp), (fn, tp) = table
    m = confusion_metrics(p, t)
    assert m["accuracy"] == (tp + tn) / 50
    assert m["sensitivity"] == tp / (tp + fn)
    assert m["specificity"] == tn / (tn + fp)
    assert m["ppv"] == tp / (tp + fp)
    assert m["npv"] == tn / (tn + fn)


def test_patient_metrics_uses_strict_rule():
    scores = {"a": 0.5, "b": 0.75, "c": 0.25, "d": 0.5}
    labels = {"a": 1, "b": 1, "c": 0, "d": 0}
    m = patient_metrics(scores, labels)
    assert m["sensitivity"] == 0.5
    assert m["specificity"] == 1.0
    assert m["auc"] == pytest.approx(pair_count_auc([0.5, 0.75, 0.25, 0.5], [1, 1, 0, 0]))


def test_t_interval():
    iv = t_interval([0.8, 0.9, 1.0])
    assert iv.mean == pytest.approx(0.9)
    assert iv.half_width == pytest.approx(4.302652729911275 * 0.1 / math.sqrt(3))
    assert math.isnan(t_interval([0.7]).low)
    assert t_interval([0.5, 0.5]).half_width == 0
