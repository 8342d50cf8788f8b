"""CSV tables and SVG figures rendered from experiment reports.

Numbers are written as ``mean ± half-width`` with three decimals; undefined values print as
``NA``. Column headers are fixed (see ``TABLE1_HEADER`` and ``TABLE2_HEADER``).
"""

from __future__ import annotations

import csv
import io
import math
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .evaluation.experiment import MetricsReport, SweepReport

DECIMALS = 3
TABLE1_HEADER = ("K-Fold Number", "AUC", "Accuracy", "Sensitivity", "Specificity", "PPV", "NPV")
TABLE1_METRICS = ("auc", "accuracy", "sensitivity", "specificity", "ppv", "npv")
TABLE2_HEADER = ("Sub-table", "Network / Cutoff Frequency (Hz)", "AUC", "Accuracy", "Sensitivity", "Specificity")
TABLE2_METRICS = ("auc", "accuracy", "sensitivity", "specificity")
SUBTABLES = ("A. Baselines", "B. FFT Filtering on CNN", "C. FFT Filtering on RF")


def _num(v) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return "NA"
    return f"{v:.{DECIMALS}f}"


def format_interval(entry: dict) -> str:
    mean = entry.get("mean")
    lo, hi = entry.get("ci_low"), entry.get("ci_high")
    if mean is None:
        return "NA"
    half = None if lo is None or hi is None else (hi - lo) / 2.0
    return f"{_num(mean)} ± {_num(half)}"


def table1_rows(report: MetricsReport) -> list[list[str]]:
    rows = [list(TABLE1_HEADER)]
    for fold, metrics in sorted(report.per_fold.items(), key=lambda kv: int(kv[0])):
        rows.append([fold] + [format_interval(metrics[m]) for m in TABLE1_METRICS])
    rows.append([f"Mean of {len(report.per_fold)} k-folds"] + [format_interval(report.aggregate[m]) for m in TABLE1_METRICS])
    return rows


def table2_rows(sweep: SweepReport) -> list[list[str]]:
    rows = [list(TABLE2_HEADER)]
    for model in ("rf", "cnn"):
        if model in sweep.baselines:
            agg = sweep.baselines[model].aggregate
            rows.append([SUBTABLES[0], model.upper()] + [format_interval(agg[m]) for m in TABLE2_METRICS])
    for model, title in (("cnn", SUBTABLES[1]), ("rf", SUBTABLES[2])):
        by_cutoff = sorted(sweep.filtered.get(model, {}).items(), key=lambda kv: -float(kv[0]))
        for key, rep in by_cutoff:
            rows.append([title, key] + [format_interval(rep.aggregate[m]) for m in TABLE2_METRICS])
    return rows


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def write_csv(rows, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(rows_to_csv(rows), encoding="utf-8")
    return path


# -- SVG -------------------------------------------------------------------------

COLORS = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728")
W, H, PAD = 480, 360, 50


class _Plot:
    def __init__(self, xlim, ylim, title, xlabel, ylabel):
        self.xlim, self.ylim = xlim, ylim
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
            '<rect width="100%" height="100%" fill="white"/>',
            f'<text x="{W / 2:.1f}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
            f'<text x="{W / 2:.1f}" y="{H - 10}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>',
            f'<text x="15" y="{H / 2:.1f}" text-anchor="middle" font-size="12" transform="rotate(-90 15 {H / 2:.1f})">{escape(ylabel)}</text>',
            f'<rect x="{PAD}" y="{PAD}" width="{W - 2 * PAD}" height="{H - 2 * PAD}" fill="none" stroke="black"/>',
        ]
        for i in range(5):
            fx = xlim[0] + (xlim[1] - xlim[0]) * i / 4
            fy = ylim[0] + (ylim[1] - ylim[0]) * i / 4
            x, y = self.px(fx, ylim[0])
            self.parts.append(f'<text x="{x:.1f}" y="{H - PAD + 15}" text-anchor="middle" font-size="10">{fx:.2f}</text>')
            x, y = self.px(xlim[0], fy)
            self.parts.append(f'<text x="{PAD - 5}" y="{y + 3:.1f}" text-anchor="end" font-size="10">{fy:.2f}</text>')

    def px(self, x, y):
        (x0, x1), (y0, y1) = self.xlim, self.ylim
        return PAD + (x - x0) / (x1 - x0) * (W - 2 * PAD), H - PAD - (y - y0) / (y1 - y0) * (H - 2 * PAD)

    def _points(self, xs, ys):
        return " ".join(f"{a:.2f},{b:.2f}" for a, b in (self.px(x, y) for x, y in zip(xs, ys)))

    def line(self, xs, ys, color, dash=None):
        extra = f' stroke-dasharray="{dash}"' if dash else ""
        self.parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5"{extra} points="{self._points(xs, ys)}"/>')

    def band(self, xs, lo, hi, color):
        pts = self._points(list(xs) + list(xs)[::-1], list(hi) + list(lo)[::-1])
        self.parts.append(f'<polygon fill="{color}" fill-opacity="0.2" stroke="none" points="{pts}"/>')

    def legend(self, names):
        for i, name in enumerate(names):
            y = PAD + 15 + 15 * i
            color = COLORS[i % len(COLORS)]
            self.parts.append(f'<line x1="{W - PAD - 110}" y1="{y}" x2="{W - PAD - 90}" y2="{y}" stroke="{color}" stroke-width="2"/>')
            self.parts.append(f'<text x="{W - PAD - 85}" y="{y + 4}" font-size="11">{escape(name)}</text>')

    def render(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def roc_svg(curves: dict) -> str:
    """ROC curves with CI bands; ``curves`` maps a name to a report's ``roc`` section."""
    plot = _Plot((0.0, 1.0), (0.0, 1.0), "Patient-level ROC", "False positive rate", "True positive rate")
    plot.line([0, 1], [0, 1], "#888888", dash="4 3")
    for i, (name, roc) in enumerate(curves.items()):
        color = COLORS[i % len(COLORS)]
        if "tpr_low" in roc:
            plot.band(roc["fpr"], roc["tpr_low"], roc["tpr_high"], color)
        if "tpr_mean" in roc:
            plot.line(roc["fpr"], roc["tpr_mean"], color)
    plot.legend(list(curves))
    return plot.render()


def gradcam_svg(cam_doc: dict) -> str:
    """Class-averaged Grad-CAM intensity (0-1) against frequency, with CI bands."""
    x = cam_doc["positions"]
    label = "Frequency (Hz)" if cam_doc.get("input_mode") == "fft" else "Position"
    plot = _Plot((min(x), max(x)), (0.0, 1.0), "Average Grad-CAM intensity", label, "Intensity (0-1.0)")
    for i, (name, summary) in enumerate(cam_doc["classes"].items()):
        color = COLORS[i % len(COLORS)]
        plot.band(x, np.clip(summary["ci_low"], 0, 1), np.clip(summary["ci_high"], 0, 1), color)
        plot.line(x, summary["mean"], color)
    plot.legend(list(cam_doc["classes"]))
    return plot.render()


def write_text(text: str, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path
