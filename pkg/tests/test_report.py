from pathlib import Path
from xml.etree import ElementTree

import pytest

from vwdlab.evaluation.experiment import MetricsReport, SweepReport
from vwdlab.evaluation.metrics import METRICS
from vwdlab.report import (
    TABLE1_HEADER,
    TABLE2_HEADER,
    format_interval,
    gradcam_svg,
    roc_svg,
    rows_to_csv,
    table1_rows,
    table2_rows,
)

GOLDEN = Path(__file__).parent / "golden"


def iv(mean, half=None):
    if half is None:
        return {"mean": mean, "ci_low": None, "ci_high": None, "n": 1}
    return {"mean": mean, "ci_low": mean - half, "ci_high": mean + half, "n": 3}


def fake_report(base, n_folds=5):
    per_fold = {str(f + 1): {m: iv(base - 0.01 * f, 0.02) for m in METRICS} for f in range(n_folds)}
    aggregate = {m: iv(base, 0.019) for m in METRICS}
    aggregate["npv"] = {"mean": None, "ci_low": None, "ci_high": None, "n": 0}
    roc = {"fpr": [0.0, 0.5, 1.0], "tpr_mean": [0.0, 0.8, 1.0], "tpr_low": [0.0, 0.6, 1.0], "tpr_high": [0.0, 1.0, 1.0]}
    return MetricsReport({}, [], {}, aggregate, {"1": aggregate}, per_fold, roc, {})


def fake_sweep():
    cutoffs = [20.0, 15.0, 10.0, 8.0, 6.0, 4.0, 2.0, 1.0, 0.5]
    filtered = {
        m: {f"{c:g}": fake_report(0.6 + c / 100) for c in cutoffs}
        for m in ("cnn", "rf")
    }
    return SweepReport(cutoffs, {"rf": fake_report(0.88), "cnn": fake_report(0.95)}, filtered)


def test_format_interval():
    assert format_interval(iv(0.95, 0.019)) == "0.950 ± 0.019"
    assert format_interval(iv(0.5)) == "0.500 ± NA"
    assert format_interval({"mean": None}) == "NA"


def test_table1_golden():
    text = rows_to_csv(table1_rows(fake_report(0.95)))
    assert text == (GOLDEN / "table1.csv").read_text(encoding="utf-8")
    assert text.splitlines()[0].split(",") == list(TABLE1_HEADER)


def test_table2_golden():
    rows = table2_rows(fake_sweep())
    text = rows_to_csv(rows)
    assert text == (GOLDEN / "table2.csv").read_text(encoding="utf-8")
    assert rows[0] == list(TABLE2_HEADER)
    sections = [r[0] for r in rows[1:]]
    assert sections == ["A. Baselines"] * 2 + ["B. FFT Filtering on CNN"] * 9 + ["C. FFT Filtering on RF"] * 9
    assert [r[1] for r in rows[3:12]] == ["20", "15", "10", "8", "6", "4", "2", "1", "0.5"]


def test_svgs_parse():
    svg = roc_svg({"CNN": fake_report(0.9).roc, "RF": fake_report(0.8).roc})
    root = ElementTree.fromstring(svg)
    assert root.tag.endswith("svg")
    assert svg.count("<polygon") == 2
    cam = {
        "input_mode": "fft",
        "positions": [-1.0, 0.0, 1.0],
        "classes": {"ards": {"mean": [0.1, 0.9, 0.1], "ci_low": [0.0, 0.8, 0.0], "ci_high": [0.2, 1.0, 0.2], "n": 5}},
    }
    svg = gradcam_svg(cam)
    ElementTree.fromstring(svg)
    assert "Intensity (0-1.0)" in svg and "Frequency (Hz)" in svg
