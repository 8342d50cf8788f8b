"""Ventilator flow waveform workbench: segmentation, spectral ablation, CNN and RF models."""

from .cohort import CohortManifest, FlowSeries, Label, load_cohort, load_flow_series, load_manifest
from .features import BreathFeatures, extract_breath_features, window_features
from .segmentation import SegmentationConfig, detect_breath_onsets, make_instances, make_windows, segment_breaths
from .spectral import AblationBand, band_ablate, dft, idft, spectral_input

__version__ = "0.1.0"

__all__ = [
    "AblationBand",
    "BreathFeatures",
    "CohortManifest",
    "FlowSeries",
    "Label",
    "SegmentationConfig",
    "band_ablate",
    "detect_breath_onsets",
    "dft",
    "extract_breath_features",
    "idft",
    "load_cohort",
    "load_flow_series",
    "load_manifest",
    "make_instances",
    "make_windows",
    "segment_breaths",
    "spectral_input",
    "window_features",
]
