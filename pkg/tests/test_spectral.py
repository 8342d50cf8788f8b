import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from vwdlab.errors import ConfigInvalid, ImaginaryResidueExceeded
from vwdlab.spectral import (
    AblationBand,
    BandAblation,
    Spectrum,
    SpectralInput,
    band_ablate,
    band_mask,
    centered_frequencies,
    dft,
    idft,
    lowpass,
    spectral_input,
)

N = 224
signals = arrays(np.float64, N, elements=st.floats(-100, 100, allow_nan=False))
cutoffs = st.floats(0.0, 25.0)


def direct_dft(x):
    n = x.size
    k = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(k, k) / n) @ x


def test_constant_dc_only():
    b = dft(np.ones(N)).bins
    assert abs(b[0] - 224) < 1e-9
    assert np.max(np.abs(b[1:])) < 1e-9


def test_single_tone():
    n = np.arange(N)
    b = np.abs(dft(np.sin(2 * np.pi * 5 * n / N)).bins)
    assert b[5] == pytest.approx(112, abs=1e-9)
    assert b[219] == pytest.approx(112, abs=1e-9)
    rest = np.delete(b, [5, 219])
    assert rest.max() < 1e-9


def test_matches_direct_dft(rng):
    x = rng.normal(size=N)
    assert np.allclose(dft(x).bins, direct_dft(x), atol=1e-9)
    assert np.allclose(idft(Spectrum(direct_dft(x))), x, atol=1e-9)


def test_idft_dc_bin():
    bins = np.zeros(N, dtype=complex)
    bins[0] = 224
    assert np.allclose(idft(Spectrum(bins)), 1.0, atol=1e-12)


def test_idft_rejects_non_hermitian():
    bins = np.zeros(N, dtype=complex)
    bins[3] = 1.0
    with pytest.raises(ImaginaryResidueExceeded):
        idft(Spectrum(bins))


def test_bin_resolution():
    s = dft(np.zeros(N))
    assert s.bin_resolution == pytest.approx(50 / 224)
    assert s.frequencies[112] == pytest.approx(25.0)
    assert s.frequencies[113] == pytest.approx(-(111 * 50 / 224))


@given(signals)
def test_round_trip(x):
    back = idft(dft(x))
    assert np.max(np.abs(back - x)) <= 1e-9 * max(1.0, np.max(np.abs(x)))


@given(signals)
def test_parseval(x):
    e_t = np.sum(x**2)
    e_f = np.sum(np.abs(dft(x).bins) ** 2) / N
    assert e_f == pytest.approx(e_t, rel=1e-9, abs=1e-9)


@given(signals, cutoffs, cutoffs, st.booleans())
def test_ablate_idempotent_and_zeroed(x, a, b, keep_dc):
    band = AblationBand(min(a, b), max(a, b), keep_dc)
    once, residue = idft(Spectrum(np.where(band_mask(N, band), dft(x).bins, 0)), return_residue=True)
    scale = max(1.0, np.max(np.abs(dft(x).bins)))
    assert residue < 1e-9 * scale
    twice = band_ablate(once, band)
    assert np.max(np.abs(twice - once)) <= 1e-9 * max(1.0, np.max(np.abs(x)))
    zeroed = ~band_mask(N, band)
    assert np.all(np.abs(dft(once).bins[zeroed]) < 1e-9 * scale)


@given(signals, cutoffs, cutoffs)
def test_lowpass_energy_nested(x, c1, c2):
    c1, c2 = min(c1, c2), max(c1, c2)
    e1 = np.sum(lowpass(x, c1) ** 2)
    e2 = np.sum(lowpass(x, c2) ** 2)
    assert e1 <= e2 + 1e-9 * max(1.0, np.sum(x**2))


def test_mask_symmetric_for_odd_and_even_lengths():
    for n in (223, 224):
        m = band_mask(n, AblationBand(3.0, 11.0, keep_dc=False))
        assert np.array_equal(m[1:], m[1:][::-1])


def test_full_band_is_identity(rng):
    x = rng.normal(size=N)
    assert np.allclose(lowpass(x, 25.0), x, atol=1e-9)


def test_tone_removed():
    # bin 45 (~10.04 Hz): a whole number of cycles, so no leakage into the passband
    x = 7.0 * np.sin(2 * np.pi * 45 * np.arange(N) / N)
    assert np.max(np.abs(lowpass(x, 2.0))) < 1e-6 * 7.0


def test_constant_kept_with_dc():
    assert np.allclose(lowpass(np.full(N, 3.5), 0.5), 3.5, atol=1e-12)
    assert np.allclose(band_ablate(np.full(N, 3.5), AblationBand.lowpass(0.5, keep_dc=False)), 0.0, atol=1e-12)


def test_band_edges_inclusive():
    res = 50 / 224
    band = AblationBand(2 * res, 4 * res, keep_dc=False)
    m = band_mask(N, band)
    assert set(np.flatnonzero(m)) == {2, 3, 4, 220, 221, 222}


@pytest.mark.parametrize("low,high", [(-1, 2), (3, 2), (0, 25.5)])
def test_invalid_band(low, high):
    with pytest.raises(ConfigInvalid):
        AblationBand(low, high)


def test_spectral_input_examples():
    s = spectral_input(np.ones(N))
    assert s[N // 2] == pytest.approx(224)
    assert np.count_nonzero(s > 1e-9) == 1
    n = np.arange(N)
    s = spectral_input(np.sin(2 * np.pi * 5 * n / N))
    f = centered_frequencies(N)
    peaks = np.flatnonzero(s > 1)
    assert np.allclose(f[peaks], [-5 * 50 / 224, 5 * 50 / 224])
    assert np.allclose(s[peaks], 112)


@given(signals)
def test_spectral_input_even_symmetric(x):
    s = spectral_input(x)
    c = N // 2
    assert np.all(s >= 0)
    assert np.allclose(s[c + 1 :], s[1:c][::-1], atol=1e-9 * max(1.0, s.max()))


def test_transformers_match_functions(rng):
    X = rng.normal(size=(5, N))
    f = BandAblation(0.0, 2.0).fit(X)
    assert np.allclose(f.transform(X), np.stack([lowpass(r, 2.0) for r in X]))
    assert np.allclose(SpectralInput().fit_transform(X), spectral_input(X))
    assert f.get_params()["high_hz"] == 2.0
