import numpy as np
import pytest

from hopjam import tfa
from hopjam import sigsynth as ss
from hopjam.errors import (
    ConfigurationError,
    DimensionError,
    ResolutionError,
)

from oracles import (
    oracle_bjd,
    oracle_cwt,
    oracle_mhd_definition,
    oracle_mhd_lag,
)

FS = 1000.0
N = 256
GRID = ss.SamplingGrid(FS, N / FS, N)


def tone(freq, n=N, fs=FS, amp=1.0, phase=0.0):
    t = np.arange(n) / fs
    g = ss.SamplingGrid(fs, n / fs, n)
    return ss.ComplexSignal(g, amp * np.exp(1j * (2 * np.pi * freq * t + phase)))


def zeros(n=N, fs=FS):
    g = ss.SamplingGrid(fs, n / fs, n)
    return ss.ComplexSignal(g, np.zeros(n, dtype=complex))


def rel_err(got, want):
    scale = np.max(np.abs(want))
    return np.max(np.abs(got - want)) / scale if scale > 0 else np.max(np.abs(got))


SMALL = tfa.TfGrid(n_time_bins=32, n_freq_bins=24, freq_range_hz=(50.0, 450.0),
                   window_length=31)


# ---------------------------------------------------------------------------
# grid plumbing
# ---------------------------------------------------------------------------

def test_grid_validation():
    with pytest.raises(ConfigurationError):
        tfa.TfGrid(freq_range_hz=(300.0, 100.0))
    with pytest.raises(ConfigurationError):
        tfa.TfGrid(window_length=32)
    with pytest.raises(ConfigurationError):
        tfa.TfGrid(scale_set=(0.2, 0.1))


def test_time_bins_subsample_record():
    g = tfa.TfGrid(n_time_bins=16)
    idx = g.time_bin_indices(256)
    assert len(idx) == 16 and idx[0] == 0 and idx[-1] == 255
    with pytest.raises(DimensionError):
        g.time_bin_indices(8)


# ---------------------------------------------------------------------------
# wavelet transform
# ---------------------------------------------------------------------------

def test_cwt_zero_signal_is_zero():
    sp = tfa.cwt(zeros(), SMALL)
    assert np.all(sp.values == 0.0)


def test_cwt_pure_tone_ridge_at_scale_map():
    # For a tone at f, the scalogram ridge must sit on the frequency bin
    # nearest f (the scale w0 / (2 pi f)), within one bin, away from edges.
    f0 = 250.0
    grid = tfa.TfGrid(n_time_bins=64, n_freq_bins=48,
                      freq_range_hz=(100.0, 450.0))
    sp = tfa.cwt(tone(f0, n=1024), grid)
    expect = np.argmin(np.abs(sp.freq_axis_hz - f0))
    interior = [b for b in range(64) if b not in sp.params["edge_time_bins"]]
    assert len(interior) > 32
    for b in interior:
        assert abs(int(np.argmax(sp.values[b])) - expect) <= 1


def test_cwt_matches_direct_integration_oracle():
    rng = np.random.default_rng(0)
    sig = ss.ComplexSignal(
        GRID, rng.standard_normal(N) + 1j * rng.standard_normal(N))
    grid = tfa.TfGrid(n_time_bins=32, n_freq_bins=8,
                      freq_range_hz=(60.0, 400.0))
    coeffs, _, freqs, _ = tfa.cwt_complex(sig, grid)
    scales = grid.wavelet_w0 / (2 * np.pi * freqs)
    want = oracle_cwt(sig.samples, FS, scales,
                      w0=grid.wavelet_w0,
                      time_indices=grid.time_bin_indices(N))
    assert rel_err(coeffs, want) <= 1e-6


def test_cwt_linearity_before_magnitude():
    x, y = tone(120.0), tone(320.0, amp=0.5, phase=1.0)
    both = ss.ComplexSignal(GRID, x.samples + y.samples)
    cx, *_ = tfa.cwt_complex(x, SMALL)
    cy, *_ = tfa.cwt_complex(y, SMALL)
    cxy, *_ = tfa.cwt_complex(both, SMALL)
    assert rel_err(cxy, cx + cy) <= 1e-6


def test_cwt_magnitude_invariant_to_global_phase():
    x = tone(150.0)
    rot = ss.ComplexSignal(GRID, x.samples * np.exp(1j * 1.234))
    a = tfa.cwt(x, SMALL).values
    b = tfa.cwt(rot, SMALL).values
    assert np.max(np.abs(a - b)) <= 1e-9 * np.max(a)


def test_cwt_rejects_unresolvable_scale():
    g = tfa.TfGrid(n_time_bins=32, n_freq_bins=8, freq_range_hz=(50.0, 450.0),
                   scale_set=(1e-4, 1e-3))
    with pytest.raises(ResolutionError):
        tfa.cwt(tone(100.0), g)


# ---------------------------------------------------------------------------
# Margenau-Hill distribution
# ---------------------------------------------------------------------------

def test_mhd_zero_signal_is_zero():
    sp = tfa.mhd(zeros(), SMALL)
    assert np.all(sp.values == 0.0)


def test_mhd_output_is_real_matrix():
    sp = tfa.mhd(tone(200.0), SMALL)
    assert sp.values.dtype == np.float64


def test_mhd_unwindowed_matches_definition_oracle():
    rng = np.random.default_rng(1)
    n = 128
    g = ss.SamplingGrid(FS, n / FS, n)
    sig = ss.ComplexSignal(g, rng.standard_normal(n) + 1j * rng.standard_normal(n))
    grid = tfa.TfGrid(n_time_bins=None, n_freq_bins=20,
                      freq_range_hz=(30.0, 470.0), window_length=None)
    sp = tfa.mhd(sig, grid)
    want = oracle_mhd_definition(sig.samples, FS, sp.freq_axis_hz)
    assert rel_err(sp.values, want) <= 1e-6


def test_mhd_windowed_matches_lag_sum_oracle():
    rng = np.random.default_rng(2)
    sig = ss.ComplexSignal(
        GRID, rng.standard_normal(N) + 1j * rng.standard_normal(N))
    sp = tfa.mhd(sig, SMALL)
    m_max = (SMALL.window_length - 1) // 2
    window = np.hamming(SMALL.window_length)[m_max:]
    want = oracle_mhd_lag(sig.samples, FS, sp.freq_axis_hz, m_max, window,
                          SMALL.time_bin_indices(N))
    assert rel_err(sp.values, want) <= 1e-6


def test_mhd_time_marginal_recovers_instantaneous_power():
    # True marginality: sum over the DFT frequency grid times df equals
    # |s(t)|^2 for the unwindowed transform of a band-limited tone.
    sig = tone(125.0)  # bin-centered: 125 Hz = bin 32 of 256 at 1 kHz
    sp = tfa.mhd(sig, tfa.dft_grid(sig))
    df = FS / N
    marginal = sp.values.sum(axis=1) * df
    want = np.abs(sig.samples) ** 2
    assert np.max(np.abs(marginal - want)) <= 0.01 * np.max(want)


def test_mhd_rejects_window_longer_than_signal():
    g = tfa.TfGrid(n_time_bins=8, n_freq_bins=8, freq_range_hz=(50.0, 450.0),
                   window_length=301)
    with pytest.raises(DimensionError):
        tfa.mhd(tone(100.0), g)


# ---------------------------------------------------------------------------
# Born-Jordan distribution
# ---------------------------------------------------------------------------

def test_bjd_zero_signal_is_zero():
    sp = tfa.bjd(zeros(), SMALL)
    assert np.all(sp.values == 0.0)


def test_bjd_matches_direct_double_sum_oracle():
    rng = np.random.default_rng(3)
    n = 128
    g = ss.SamplingGrid(FS, n / FS, n)
    sig = ss.ComplexSignal(g, rng.standard_normal(n) + 1j * rng.standard_normal(n))
    grid = tfa.TfGrid(n_time_bins=24, n_freq_bins=16,
                      freq_range_hz=(30.0, 470.0), window_length=33)
    sp = tfa.bjd(sig, grid)
    m_max = (grid.window_length - 1) // 2
    window = np.hamming(grid.window_length)[m_max:]
    want = oracle_bjd(sig.samples, FS, sp.freq_axis_hz, m_max, window,
                      grid.time_bin_indices(n), a=grid.bjd_a)
    assert rel_err(sp.values, want) <= 1e-6


def test_bjd_single_tone_concentrates_at_tone():
    f0 = 200.0
    grid = tfa.TfGrid(n_time_bins=64, n_freq_bins=64,
                      freq_range_hz=(50.0, 450.0), window_length=None)
    sp = tfa.bjd(tone(f0), grid)
    profile = np.abs(sp.values).mean(axis=0)
    expect = np.argmin(np.abs(sp.freq_axis_hz - f0))
    assert abs(int(np.argmax(profile)) - expect) <= 1


def test_bjd_two_tone_midpoint_cross_term():
    f1, f2 = 180.0, 220.0
    sig = ss.ComplexSignal(GRID, tone(f1).samples + tone(f2).samples)
    grid = tfa.TfGrid(n_time_bins=64, n_freq_bins=101,
                      freq_range_hz=(50.0, 450.0), window_length=None)
    sp = tfa.bjd(sig, grid)
    mid = np.argmin(np.abs(sp.freq_axis_hz - 0.5 * (f1 + f2)))
    mass = np.abs(sp.values[:, mid]).mean()
    assert mass >= 0.05 * np.abs(sp.values).max()


def test_bilinear_energy_integral():
    sig = tone(125.0, amp=1.3)
    energy = np.sum(np.abs(sig.samples) ** 2) / FS
    for op in (tfa.mhd, tfa.bjd):
        sp = op(sig, tfa.dft_grid(sig))
        total = sp.values.sum() * (1.0 / FS) * (FS / N)
        assert total == pytest.approx(energy, rel=0.02)


def test_bilinear_time_shift_covariance():
    # Windowed distributions of a shifted record equal the shifted
    # distribution wherever the lag support stays inside both records.
    rng = np.random.default_rng(4)
    base = rng.standard_normal(N) + 1j * rng.standard_normal(N)
    shift = 16
    shifted = np.zeros_like(base)
    shifted[shift:] = base[:-shift]
    grid = tfa.TfGrid(n_time_bins=None, n_freq_bins=16,
                      freq_range_hz=(30.0, 470.0), window_length=33)
    for op in (tfa.mhd, tfa.bjd):
        d1 = op(ss.ComplexSignal(GRID, base), grid).values
        d2 = op(ss.ComplexSignal(GRID, shifted), grid).values
        guard = 33  # max lag reach plus averaging margin
        inner = slice(shift + guard, N - guard)
        ref = d1[np.arange(N)[inner] - shift]
        assert rel_err(d2[inner], ref) <= 1e-9


# ---------------------------------------------------------------------------
# gray imaging and files
# ---------------------------------------------------------------------------

def _spectrogram(values):
    values = np.asarray(values, dtype=float)
    return tfa.Spectrogram(values,
                           np.arange(values.shape[0]) * 1e-3,
                           np.linspace(100.0, 400.0, values.shape[1]),
                           tfa.TRANSFORM_WAVELET)


def test_to_gray_zero_maps_to_zero():
    img = tfa.to_gray(_spectrogram(np.zeros((8, 6))))
    assert np.all(img.pixels == 0.0)


def test_to_gray_peak_maps_to_255_and_scale_invariance():
    vals = np.abs(np.random.default_rng(5).standard_normal((8, 6)))
    img1 = tfa.to_gray(_spectrogram(vals))
    img2 = tfa.to_gray(_spectrogram(2.0 * vals))
    assert img1.pixels.max() == pytest.approx(255.0)
    assert np.allclose(img1.pixels, img2.pixels)


def test_to_gray_orientation_row0_is_lowest_frequency():
    vals = np.zeros((4, 3))
    vals[:, 0] = 7.0  # energy in the lowest-frequency column
    img = tfa.to_gray(_spectrogram(vals))
    assert np.all(img.pixels[0] == 255.0)
    assert np.all(img.pixels[1:] == 0.0)
    assert img.freq_axis_hz[0] == pytest.approx(100.0)


def test_spectrogram_file_round_trip(tmp_path):
    sp = tfa.mhd(tone(200.0), SMALL)
    path = str(tmp_path / "spec.bin")
    tfa.write_spectrogram(path, sp)
    back = tfa.read_spectrogram(path)
    assert back.transform_kind == sp.transform_kind
    assert np.allclose(back.values, sp.values, atol=1e-5 * np.abs(sp.values).max())
    assert np.allclose(back.freq_axis_hz, sp.freq_axis_hz)
    assert back.params["window_length"] == SMALL.window_length
