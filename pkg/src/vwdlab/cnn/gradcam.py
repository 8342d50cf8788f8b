"""Grad-CAM saliency on the last dense-block output."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InsufficientSamples
from ..stats import t_band
from .densenet import DenseNet1D


@dataclass(frozen=True)
class CamMap:
    intensities: np.ndarray
    target_class: int


@dataclass(frozen=True)
class CamSummary:
    """Position-wise mean and 95% t-interval of a set of CamMaps."""

    mean: np.ndarray
    low: np.ndarray
    high: np.ndarray
    n: int

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "ci_low": self.low.tolist(), "ci_high": self.high.tolist(), "n": self.n}


def normalize_map(m: np.ndarray) -> np.ndarray:
    """Min-max to [0, 1]; all-zero stays zero, any other constant map becomes all ones."""
    m = np.asarray(m, dtype=np.float64)
    hi, lo = m.max(), m.min()
    if hi == 0 and lo == 0:
        return np.zeros_like(m)
    if hi == lo:
        return np.ones_like(m)
    return (m - lo) / (hi - lo)


def upsample(m: np.ndarray, length: int) -> np.ndarray:
    """Linear interpolation from ``len(m)`` positions onto ``length`` evenly spread ones."""
    if m.size == length:
        return m.astype(np.float64)
    if m.size == 1:
        return np.full(length, float(m[0]))
    return np.interp(np.linspace(0.0, m.size - 1, length), np.arange(m.size), m)


def cam_from_activations(activations, gradients, input_length: int) -> np.ndarray:
    """CamMap intensities from one sample's ``(channels, positions)`` activations and gradients."""
    a = np.asarray(activations, dtype=np.float64)
    alpha = np.asarray(gradients, dtype=np.float64).mean(axis=1)
    raw = np.maximum((alpha[:, None] * a).sum(axis=0), 0.0)
    return normalize_map(upsample(raw, input_length))


def grad_cam_batch(network: DenseNet1D, x, target_class: int = 1, batch_size: int = 128) -> np.ndarray:
    """CamMap intensities ``(n, input_length)`` for every row of a network-ready batch.

    Eval mode makes samples independent, so one backward pass of the summed target logits
    yields every sample's own gradient.
    """
    x = network.check_input(x)
    out = []
    for i in range(0, x.shape[0], batch_size):
        xb = x[i : i + batch_size]
        logits, cache = network.forward(xb, train=False)
        dlogits = np.zeros_like(logits)
        dlogits[:, target_class] = 1.0
        d_a = network.head_backward(cache, dlogits)
        acts = cache["features"]
        out.extend(cam_from_activations(acts[j], d_a[j], network.config.input_length) for j in range(xb.shape[0]))
    return np.array(out).reshape(-1, network.config.input_length)


def grad_cam(network: DenseNet1D, instance, target_class: int = 1) -> CamMap:
    x = np.asarray(instance, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    return CamMap(grad_cam_batch(network, x[None], target_class)[0], target_class)


def average_cam(maps_by_class: dict) -> dict:
    """Per-class position-wise mean with 95% t-interval; every class needs >= 2 maps."""
    out = {}
    for cls, maps in maps_by_class.items():
        a = np.array([m.intensities if isinstance(m, CamMap) else m for m in maps], dtype=np.float64)
        if a.ndim != 2 or a.shape[0] < 2:
            raise InsufficientSamples(f"class {cls!r} has {0 if a.ndim != 2 else a.shape[0]} maps; need >= 2")
        mean, low, high = t_band(a)
        out[cls] = CamSummary(mean, low, high, a.shape[0])
    return out
