"""Flow-only expert respiratory features, per breath and per breath window."""

from __future__ import annotations

from dataclasses import astuple, dataclass, fields

import numpy as np

from .cohort import FlowSeries, Label
from .errors import DegenerateMorphology
from .segmentation import (
    BreathSegment,
    BreathWindow,
    SegmentationConfig,
    detect_breath_onsets,
    segment_breaths,
)

MIN_PEAK_INSP_FLOW = 1.0  # L/min


@dataclass(frozen=True)
class BreathFeatures:
    i_time: float
    e_time: float
    ie_ratio: float
    tv_insp: float
    tv_exp: float
    peak_insp_flow: float
    peak_exp_flow: float
    mean_insp_flow: float
    resp_rate: float
    minute_vent: float

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=np.float64)


FEATURE_NAMES = tuple(f.name for f in fields(BreathFeatures))


@dataclass(frozen=True)
class WindowFeatureVector:
    patient_id: str
    label: Label
    values: np.ndarray
    start_index: int = 0
    n_breaths: int = 0

    def as_dict(self) -> dict:
        return dict(zip(FEATURE_NAMES, self.values.tolist()))


def extract_breath_features(
    segment: BreathSegment | np.ndarray, sample_rate: int = 50, onset_threshold: float = 2.0
) -> BreathFeatures:
    """Features of one onset-to-onset breath.

    Inspiration runs from the segment start until flow first falls to <= 0 after having
    exceeded ``onset_threshold``; the remainder is expiration. Volumes are rectangular
    sums of flow (L/min) * dt (s) / 60.
    """
    x = segment.values if isinstance(segment, BreathSegment) else np.asarray(segment, dtype=np.float64)
    if x.size < 2:
        raise DegenerateMorphology("segment shorter than two samples")
    dt = 1.0 / sample_rate
    exceeded = np.flatnonzero(x > onset_threshold)
    if exceeded.size == 0:
        raise DegenerateMorphology("flow never exceeds the onset threshold")
    falls = np.flatnonzero(x[exceeded[0] :] <= 0)
    if falls.size == 0:
        raise DegenerateMorphology("no expiratory phase")
    split = exceeded[0] + falls[0]
    insp, exp = x[:split], x[split:]
    if insp.size == 0 or exp.size == 0:
        raise DegenerateMorphology("empty respiratory phase")
    peak_insp = float(insp.max())
    if peak_insp < MIN_PEAK_INSP_FLOW:
        raise DegenerateMorphology(f"peak inspiratory flow {peak_insp:.3g} L/min below {MIN_PEAK_INSP_FLOW}")

    i_time = insp.size * dt
    e_time = exp.size * dt
    tv_insp = float(insp.sum()) * dt / 60.0
    rr = 60.0 / (i_time + e_time)
    return BreathFeatures(
        i_time=i_time,
        e_time=e_time,
        ie_ratio=i_time / e_time,
        tv_insp=tv_insp,
        tv_exp=-float(exp.sum()) * dt / 60.0,
        peak_insp_flow=peak_insp,
        peak_exp_flow=float(-exp.min()),
        mean_insp_flow=float(insp.mean()),
        resp_rate=rr,
        minute_vent=tv_insp * rr,
    )


def aggregate_breaths(per_breath, expected: int) -> np.ndarray:
    """Component-wise median of successful breaths; majority-degenerate windows raise.

    ``per_breath`` holds :class:`BreathFeatures` or ``None`` for degenerate breaths; breaths
    missing from the list (``len < expected``) also count as degenerate.
    """
    good = [b.as_array() for b in per_breath if b is not None]
    bad = expected - len(good)
    if bad * 2 > expected or not good:
        raise DegenerateMorphology(f"{bad} of {expected} breaths degenerate")
    return np.median(np.stack(good), axis=0)


def window_features(
    window: BreathWindow,
    series: FlowSeries,
    cfg: SegmentationConfig = SegmentationConfig(),
    onsets=None,
) -> WindowFeatureVector:
    """Median breath features over the time span covered by ``window``.

    Onsets are re-detected on ``series`` (which may be a filtered version of the signal the
    window was cut from) inside ``[first instance start, last instance end)``; the first
    ``window_size`` of them anchor the breaths. Pass ``onsets`` to reuse a detection.
    """
    x = series.samples
    if onsets is None:
        onsets = detect_breath_onsets(x, cfg)
    onsets = np.asarray(onsets, dtype=np.int64)
    lo = window.instances[0].start_index
    hi = min(window.instances[-1].start_index + cfg.instance_length, x.size)
    pos = np.searchsorted(onsets, [lo, hi])
    first = pos[0]
    chosen = onsets[first : min(pos[1], first + cfg.window_size)]
    # segment boundaries may run past the span: breath k ends at the next detected onset
    bounds = onsets[first : first + chosen.size + 1].tolist()
    segments = segment_breaths(x, bounds, series.sample_rate, series.patient_id)[: chosen.size]
    per_breath = []
    for seg in segments:
        try:
            per_breath.append(extract_breath_features(seg, series.sample_rate, cfg.onset_threshold))
        except DegenerateMorphology:
            per_breath.append(None)
    try:
        values = aggregate_breaths(per_breath, cfg.window_size)
    except DegenerateMorphology as exc:
        raise DegenerateMorphology(f"{series.patient_id} window @{lo}: {exc}") from None
    n_ok = sum(b is not None for b in per_breath)
    return WindowFeatureVector(series.patient_id, series.label, values, lo, n_ok)


def series_breath_features(series: FlowSeries, cfg: SegmentationConfig = SegmentationConfig()):
    """Per-breath features for every detected breath of a series (degenerate ones as None)."""
    onsets = detect_breath_onsets(series, cfg)
    out = []
    for seg in segment_breaths(series, onsets, series.sample_rate):
        try:
            out.append(extract_breath_features(seg, series.sample_rate, cfg.onset_threshold))
        except DegenerateMorphology:
            out.append(None)
    return onsets, out
