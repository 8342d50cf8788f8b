"""Inhalation-onset detection and fixed-length breath instances/windows."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cohort import FlowSeries, Label
from .errors import ConfigInvalid


@dataclass(frozen=True)
class SegmentationConfig:
    onset_threshold: float = 2.0
    pre_onset_nonpositive_run: int = 5
    instance_length: int = 224
    window_size: int = 20

    def __post_init__(self):
        for name in ("onset_threshold", "pre_onset_nonpositive_run", "instance_length", "window_size"):
            if not getattr(self, name) > 0:
                raise ConfigInvalid(f"{name} must be strictly positive")


@dataclass(frozen=True)
class BreathInstance:
    patient_id: str
    label: Label
    start_index: int
    values: np.ndarray


@dataclass(frozen=True)
class BreathWindow:
    patient_id: str
    label: Label
    instances: tuple[BreathInstance, ...]

    @property
    def start_index(self) -> int:
        return self.instances[0].start_index

    @property
    def onsets(self) -> list[int]:
        return [inst.start_index for inst in self.instances]

    def values(self) -> np.ndarray:
        """Instance values stacked as ``(window_size, instance_length)``."""
        return np.stack([inst.values for inst in self.instances])


@dataclass(frozen=True)
class BreathSegment:
    patient_id: str
    onset_index: int
    values: np.ndarray


def _samples(series) -> np.ndarray:
    if isinstance(series, FlowSeries):
        return series.samples
    return np.asarray(series, dtype=np.float64)


def detect_breath_onsets(series, cfg: SegmentationConfig = SegmentationConfig()) -> list[int]:
    """Indices where flow first exceeds the onset threshold after a non-positive run.

    A sample ``i`` is an onset when ``x[i] > threshold``, ``x[i-1] <= threshold``, and at
    least ``pre_onset_nonpositive_run`` consecutive samples ``<= 0`` occur between the last
    above-threshold sample and ``i``. Samples in ``(0, threshold]`` may sit between that run
    and ``i`` (a smooth rise, or noise around zero flow at end-expiration).
    """
    x = _samples(series)
    n = x.size
    run = cfg.pre_onset_nonpositive_run
    if n <= run:
        return []
    idx = np.arange(n)
    above = x > cfg.onset_threshold
    nonpos = x <= 0
    last_above = np.maximum.accumulate(np.where(above, idx, -1))
    # index at which a non-positive run of the required length is completed
    breaks = np.maximum.accumulate(np.where(~nonpos, idx, -1))
    run_done = np.where(nonpos & (idx - breaks >= run), idx, -1)
    last_run_done = np.maximum.accumulate(run_done)

    cand = np.flatnonzero(above[1:] & ~above[:-1]) + 1
    ok = last_run_done[cand - 1] > last_above[cand - 1]
    return cand[ok].tolist()


def make_instances(series: FlowSeries, onsets, cfg: SegmentationConfig = SegmentationConfig()) -> list[BreathInstance]:
    x = series.samples
    length = cfg.instance_length
    out = []
    for o in onsets:
        o = int(o)
        if o + length <= x.size:
            out.append(BreathInstance(series.patient_id, series.label, o, x[o : o + length]))
    return out


def make_windows(instances, cfg: SegmentationConfig = SegmentationConfig()) -> list[BreathWindow]:
    size = cfg.window_size
    windows = []
    for w in range(len(instances) // size):
        group = tuple(instances[w * size : (w + 1) * size])
        windows.append(BreathWindow(group[0].patient_id, group[0].label, group))
    return windows


def segment_breaths(series, onsets, sample_rate: int = 50, patient_id: str | None = None) -> list[BreathSegment]:
    """Variable-length breaths from each onset to the next.

    The final onset yields a segment only if at least half a second of signal follows it.
    """
    x = _samples(series)
    if patient_id is None:
        patient_id = getattr(series, "patient_id", "")
    onsets = [int(o) for o in onsets]
    segments = [BreathSegment(patient_id, a, x[a:b]) for a, b in zip(onsets[:-1], onsets[1:])]
    if onsets and x.size - onsets[-1] >= 0.5 * sample_rate:
        segments.append(BreathSegment(patient_id, onsets[-1], x[onsets[-1] :]))
    return segments


def segment_series(series: FlowSeries, cfg: SegmentationConfig = SegmentationConfig()):
    """Onsets, instances and windows for one patient in a single call."""
    onsets = detect_breath_onsets(series, cfg)
    instances = make_instances(series, onsets, cfg)
    return onsets, instances, make_windows(instances, cfg)
