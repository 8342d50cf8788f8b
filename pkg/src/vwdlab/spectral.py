"""DFT helpers, brick-wall frequency ablation, and spectral model inputs.

Conventions: forward transform is unnormalized, ``X[k] = sum_n x[n] exp(-2j*pi*k*n/N)``;
the inverse carries the ``1/N``. Bin ``k`` maps to ``k*fs/N`` Hz for ``k <= N/2`` and to
``(k-N)*fs/N`` otherwise, so the Nyquist bin of an even-length transform is +fs/2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array

from .errors import ConfigInvalid, ImaginaryResidueExceeded

SAMPLE_RATE_HZ = 50
RESIDUE_TOLERANCE = 1e-6


@dataclass(frozen=True)
class Spectrum:
    bins: np.ndarray
    sample_rate: float = SAMPLE_RATE_HZ

    def __len__(self) -> int:
        return self.bins.size

    @property
    def bin_resolution(self) -> float:
        return self.sample_rate / self.bins.size

    @property
    def frequencies(self) -> np.ndarray:
        return bin_frequencies(self.bins.size, self.sample_rate)


@dataclass(frozen=True)
class AblationBand:
    low_hz: float = 0.0
    high_hz: float = SAMPLE_RATE_HZ / 2
    keep_dc: bool = True

    def __post_init__(self):
        if not (0.0 <= self.low_hz <= self.high_hz <= SAMPLE_RATE_HZ / 2):
            raise ConfigInvalid(
                f"band must satisfy 0 <= low <= high <= {SAMPLE_RATE_HZ / 2}, got [{self.low_hz}, {self.high_hz}]"
            )

    @classmethod
    def lowpass(cls, cutoff_hz: float, keep_dc: bool = True) -> "AblationBand":
        return cls(0.0, float(cutoff_hz), keep_dc)

    def to_dict(self) -> dict:
        return {"low_hz": self.low_hz, "high_hz": self.high_hz, "keep_dc": self.keep_dc}


def bin_frequencies(n: int, sample_rate: float = SAMPLE_RATE_HZ) -> np.ndarray:
    k = np.arange(n)
    return np.where(k <= n // 2, k, k - n) * (sample_rate / n)


def dft(values, sample_rate: float = SAMPLE_RATE_HZ) -> Spectrum:
    x = np.asarray(values, dtype=np.float64)
    return Spectrum(np.fft.fft(x), sample_rate)


def idft(spectrum: Spectrum, return_residue: bool = False, reference: float | None = None):
    """Real inverse transform; raises if the imaginary part is not negligible.

    The residue is judged relative to ``reference`` (default: the largest bin magnitude).
    """
    z = np.fft.ifft(spectrum.bins)
    residue = float(np.max(np.abs(z.imag))) if z.size else 0.0
    if reference is None:
        reference = float(np.max(np.abs(spectrum.bins))) if z.size else 0.0
    scale = reference
    if residue > RESIDUE_TOLERANCE * scale:
        raise ImaginaryResidueExceeded(f"imaginary residue {residue:.3e} exceeds {RESIDUE_TOLERANCE:g} x {scale:.3e}")
    if return_residue:
        return z.real, residue
    return z.real


def band_mask(n: int, band: AblationBand, sample_rate: float = SAMPLE_RATE_HZ) -> np.ndarray:
    """Boolean mask of bins kept by ``band`` (inclusive on both edges)."""
    f = np.abs(bin_frequencies(n, sample_rate))
    keep = (f >= band.low_hz) & (f <= band.high_hz)
    keep[0] = band.keep_dc
    return keep


def band_ablate(values, band: AblationBand, sample_rate: float = SAMPLE_RATE_HZ) -> np.ndarray:
    """Zero every DFT coefficient outside ``band`` and transform back.

    Works on any length; bins k and N-k share |frequency| so the mask is conjugate-symmetric.
    """
    spec = dft(values, sample_rate)
    kept = np.where(band_mask(len(spec), band, sample_rate), spec.bins, 0.0)
    ref = float(np.max(np.abs(spec.bins))) if len(spec) else 0.0
    return idft(Spectrum(kept, sample_rate), reference=ref)


def lowpass(values, cutoff_hz: float, sample_rate: float = SAMPLE_RATE_HZ) -> np.ndarray:
    return band_ablate(values, AblationBand.lowpass(cutoff_hz), sample_rate)


def spectral_input(values) -> np.ndarray:
    """Two-sided magnitude spectrum, DC-centred (position N//2), same length as the input."""
    return np.abs(np.fft.fftshift(np.fft.fft(np.asarray(values, dtype=np.float64), axis=-1), axes=-1))


def centered_frequencies(n: int, sample_rate: float = SAMPLE_RATE_HZ) -> np.ndarray:
    """Frequency (Hz) at each position of :func:`spectral_input` output."""
    return (np.arange(n) - n // 2) * (sample_rate / n)


class BandAblation(TransformerMixin, BaseEstimator):
    """Row-wise brick-wall band filter, usable inside sklearn pipelines."""

    def __init__(self, low_hz=0.0, high_hz=25.0, keep_dc=True, sample_rate=SAMPLE_RATE_HZ):
        self.low_hz = low_hz
        self.high_hz = high_hz
        self.keep_dc = keep_dc
        self.sample_rate = sample_rate

    def fit(self, X, y=None):
        X = check_array(X)
        self.band_ = AblationBand(self.low_hz, self.high_hz, self.keep_dc)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        X = check_array(X)
        band = AblationBand(self.low_hz, self.high_hz, self.keep_dc)
        mask = band_mask(X.shape[1], band, self.sample_rate)
        F = np.fft.fft(X, axis=1)
        ref = np.max(np.abs(F), axis=1) if F.size else []
        Z = F * mask
        return np.stack([idft(Spectrum(z, self.sample_rate), reference=r) for z, r in zip(Z, ref)]) if len(Z) else X.copy()


class SpectralInput(TransformerMixin, BaseEstimator):
    """Maps time-domain instances to DC-centred magnitude spectra."""

    def fit(self, X, y=None):
        self.n_features_in_ = check_array(X).shape[1]
        return self

    def transform(self, X):
        return spectral_input(check_array(X))
