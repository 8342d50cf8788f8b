"""Turning raw instance values into CNN input tensors."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigInvalid, ShapeMismatch
from ..spectral import spectral_input

INPUT_MODES = ("raw", "fft", "raw_plus_fft")
SCALINGS = ("none", "channel", "position")


def channels_for(mode: str) -> int:
    if mode not in INPUT_MODES:
        raise ConfigInvalid(f"unknown CNN input mode {mode!r}; expected one of {INPUT_MODES}")
    return 2 if mode == "raw_plus_fft" else 1


def build_input(values, mode: str = "raw") -> np.ndarray:
    """``(n, length)`` flow instances -> ``(n, channels, length)`` network input."""
    x = np.asarray(values, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2:
        raise ShapeMismatch(f"instances must be a 2-D array, got shape {x.shape}")
    channels_for(mode)
    if mode == "raw":
        return x[:, None, :]
    if mode == "fft":
        return spectral_input(x)[:, None, :]
    return np.stack([x, spectral_input(x)], axis=1)


@dataclass
class InputScaler:
    """Standardisation fitted on training inputs.

    ``channel`` uses one mean/sd per channel; ``position`` one per (channel, position),
    which suits spectra whose scale varies by orders of magnitude across frequency.
    """

    kind: str = "channel"
    mean: np.ndarray | None = None
    scale: np.ndarray | None = None

    def fit(self, x: np.ndarray) -> "InputScaler":
        if self.kind not in SCALINGS:
            raise ConfigInvalid(f"unknown scaling {self.kind!r}; expected one of {SCALINGS}")
        if self.kind == "none":
            self.mean = np.zeros((1, x.shape[1], 1))
            self.scale = np.ones((1, x.shape[1], 1))
            return self
        axes = (0, 2) if self.kind == "channel" else (0,)
        self.mean = x.mean(axis=axes, keepdims=True)
        sd = x.std(axis=axes, keepdims=True)
        self.scale = np.where(sd > 1e-12, sd, 1.0)
        return self

    def transform(self, x: np.ndarray) -> np.ndarray:
        return (x - self.mean) / self.scale

    def to_arrays(self) -> dict:
        return {"scaler_mean": self.mean, "scaler_scale": self.scale}

    @classmethod
    def from_arrays(cls, kind, mean, scale) -> "InputScaler":
        return cls(kind, np.asarray(mean, dtype=np.float64), np.asarray(scale, dtype=np.float64))
