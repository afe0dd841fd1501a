"""Time-frequency analysis: Morlet scalogram plus two Cohen-class
bilinear distributions (Margenau-Hill and Born-Jordan).

All three transforms share one calibrated grid (time bins in seconds,
frequency bins in Hz) so their outputs can be composited channel-wise.

Discretization conventions (shared with the brute-force reference code in
the test tree, which re-evaluates the defining sums naively):

* Integrals over time become Riemann sums on the sample grid, dt = 1/fs.
  Samples outside the record are zero.
* Wavelet analysis correlates the record with dilated copies of the Morlet
  wavelet  psi(x) = pi**-0.25 * exp(1j*w0*x - x*x/2),  conjugated, with an
  amplitude factor 1/sqrt(a); a scale maps to frequency via
  f = w0 / (2*pi*a).
* Bilinear lag products use the asymmetric half-shift split
  s[u + ceil(m/2)] * conj(s[u - floor(m/2)]) for integer lag m (tau = m*dt),
  which keeps full lag resolution on the integer grid and makes the
  distributions exactly real by lag symmetry.
* The Margenau-Hill local autocorrelation is
  0.5 * (s[t]*conj(s[t-m]) + s[t+m]*conj(s[t])); summed over all lags this
  is identical to Re{ s(t) * conj(S(f)) * exp(-2j*pi*f*t) } with S the
  Riemann-sum spectrum, which is the classical definition of the
  distribution (the real part of the Rihaczek distribution). See
  docs/bilinear_identities.md for the derivation.
* The Born-Jordan local autocorrelation averages the lag product uniformly
  over u in [t - floor(a*|m|), t + floor(a*|m|)] with the kernel constant
  a = 1/2 by default (the classical sinc kernel).
* A lag window (Hamming by default, length min(n, 257)) tames cross terms;
  window_length=None selects the exact unwindowed transform over all lags.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import fft as sfft

from .errors import (
    ConfigurationError,
    DimensionError,
    ResolutionError,
)
from .fileio import atomic_write_text
from .imgprep import GrayImage
from .sigsynth import ComplexSignal

SPECTROGRAM_FORMAT_VERSION = 1

TRANSFORM_WAVELET = "wavelet"
TRANSFORM_MHD = "mhd"
TRANSFORM_BJD = "bjd"
TRANSFORM_KINDS = (TRANSFORM_WAVELET, TRANSFORM_MHD, TRANSFORM_BJD)


@dataclass(frozen=True)
class TfGrid:
    """Discretization of the time-frequency plane.

    ``n_time_bins=None`` evaluates every sample; ``window_length=None``
    selects the unwindowed bilinear transform (all lags, boxcar weighting).
    ``scale_set`` overrides the wavelet scales; by default they are derived
    from the frequency axis through the scale map.
    """

    n_time_bins: Optional[int] = 256
    n_freq_bins: int = 256
    freq_range_hz: tuple = (4e3, 360e3)
    window_length: Optional[int] = 257
    lag_window: str = "hamming"
    wavelet_w0: float = 6.0
    bjd_a: float = 0.5
    scale_set: Optional[tuple] = None

    def __post_init__(self):
        lo, hi = self.freq_range_hz
        if not 0.0 <= lo < hi:
            raise ConfigurationError("freq_range_hz must satisfy 0 <= low < high")
        if self.n_freq_bins < 2:
            raise ConfigurationError("need at least 2 frequency bins")
        if self.n_time_bins is not None and self.n_time_bins < 2:
            raise ConfigurationError("need at least 2 time bins")
        if self.window_length is not None and self.window_length % 2 == 0:
            raise ConfigurationError("window_length must be odd")
        if self.lag_window not in ("hamming", "boxcar"):
            raise ConfigurationError(f"unknown lag window {self.lag_window!r}")
        if self.bjd_a <= 0:
            raise ConfigurationError("bjd averaging constant must be positive")
        if self.scale_set is not None:
            scales = tuple(float(s) for s in self.scale_set)
            if any(s <= 0 for s in scales):
                raise ConfigurationError("scales must be positive")
            if any(b <= a for a, b in zip(scales, scales[1:])):
                raise ConfigurationError("scale_set must be strictly increasing")
            object.__setattr__(self, "scale_set", scales)

    def freq_axis_hz(self) -> np.ndarray:
        return np.linspace(self.freq_range_hz[0], self.freq_range_hz[1],
                           self.n_freq_bins)

    def scales(self) -> np.ndarray:
        """Wavelet scales, ordered so the mapped frequencies increase."""
        if self.scale_set is not None:
            return np.asarray(self.scale_set)[::-1]
        freqs = self.freq_axis_hz()
        return self.wavelet_w0 / (2.0 * np.pi * freqs)

    def time_bin_indices(self, n_samples: int) -> np.ndarray:
        if self.n_time_bins is None:
            return np.arange(n_samples)
        if n_samples < self.n_time_bins:
            raise DimensionError(
                f"record of {n_samples} samples cannot fill "
                f"{self.n_time_bins} time bins"
            )
        return np.round(np.linspace(0, n_samples - 1, self.n_time_bins)).astype(int)


def dft_grid(signal: ComplexSignal, n_time_bins: Optional[int] = None) -> TfGrid:
    """Grid whose frequency axis is exactly the DFT bin set of the record.

    On this grid the unwindowed bilinear distributions satisfy the marginal
    and total-energy identities exactly.
    """
    n = signal.grid.n_samples
    fs = signal.grid.sample_rate_hz
    return TfGrid(
        n_time_bins=n_time_bins,
        n_freq_bins=n,
        freq_range_hz=(0.0, fs * (n - 1) / n),
        window_length=None,
        lag_window="boxcar",
    )


@dataclass(frozen=True)
class Spectrogram:
    """Real-valued time x frequency matrix with axis calibration."""

    values: np.ndarray            # (n_time_bins, n_freq_bins)
    time_axis_s: np.ndarray
    freq_axis_hz: np.ndarray
    transform_kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "time_axis_s", np.asarray(self.time_axis_s, float))
        object.__setattr__(self, "freq_axis_hz", np.asarray(self.freq_axis_hz, float))
        if values.shape != (len(self.time_axis_s), len(self.freq_axis_hz)):
            raise DimensionError("axis lengths do not match the value matrix")
        if not np.all(np.isfinite(values)):
            raise DimensionError("spectrogram contains non-finite values")
        for ax in (self.time_axis_s, self.freq_axis_hz):
            if len(ax) > 1 and np.any(np.diff(ax) <= 0):
                raise DimensionError("axes must be strictly increasing")


# ---------------------------------------------------------------------------
# Morlet continuous wavelet transform
# ---------------------------------------------------------------------------

def morlet(x: np.ndarray, w0: float = 6.0) -> np.ndarray:
    """Morlet mother wavelet pi**-0.25 * exp(1j*w0*x - x*x/2)."""
    x = np.asarray(x, dtype=np.float64)
    return np.pi ** -0.25 * np.exp(1j * w0 * x - 0.5 * x * x)


def _wavelet_half_support(scale: float, fs: float) -> int:
    # +-8 standard deviations: the truncated Gaussian tail is ~1e-14 of the
    # peak, far below the 1e-6 oracle-equivalence tolerance.
    return int(np.ceil(8.0 * scale * fs))


def cwt_complex(signal: ComplexSignal, grid: TfGrid):
    """Complex wavelet coefficients on the grid.

    Returns (coeffs, time_axis_s, freq_axis_hz, edge_time_bins) where
    ``coeffs[b, j]`` is the correlation of the record with the conjugated
    Morlet wavelet at scale ``w0 / (2*pi*freq_axis[j])`` translated to time
    bin ``b``, including the 1/sqrt(scale) amplitude factor and the dt
    integration weight. ``edge_time_bins`` flags bins whose largest-scale
    support crosses a record edge (treated as zeros).
    """
    s = signal.samples
    n = signal.grid.n_samples
    fs = signal.grid.sample_rate_hz
    dt = signal.grid.dt
    scales = grid.scales()
    if len(scales) == 0:
        raise ConfigurationError("empty scale set")
    for a in scales:
        if 2 * int(4.0 * a * fs) + 1 < 8:
            raise ResolutionError(
                f"scale {a:g} s spans fewer than 8 samples at {fs:g} Hz"
            )
    freqs = grid.wavelet_w0 / (2.0 * np.pi * scales)
    if freqs[-1] >= fs / 2.0:
        raise ConfigurationError(
            f"wavelet frequency axis reaches {freqs[-1]:g} Hz, at or above "
            f"Nyquist ({fs / 2.0:g} Hz)"
        )

    idx_t = grid.time_bin_indices(n)
    m_max = _wavelet_half_support(float(np.max(scales)), fs)
    length = sfft.next_fast_len(n + 2 * m_max + 1)
    s_fft = sfft.fft(s, length)

    # The correlation sum_m s[b+m] * conj(psi(m*dt/a)) * dt/sqrt(a) is a
    # circular convolution; by Poisson summation the sampled conjugated
    # Morlet kernel has the closed-form spectrum
    #     pi**-0.25 * sqrt(2*pi*a) * sum_k exp(-(a*(w + 2*pi*k*fs) - w0)^2/2)
    # where the k = +-1 images carry the sampling aliases (higher images and
    # the truncation residue sit below 1e-14 for resolvable scales), so the
    # kernel FFTs need not be computed.
    omega = 2.0 * np.pi * sfft.fftfreq(length, dt)
    coeffs = np.empty((len(idx_t), len(scales)), dtype=np.complex128)
    chunk = max(1, int(4e6) // length)
    for j0 in range(0, len(scales), chunk):
        a = scales[j0:j0 + chunk][:, None]
        arg = a * omega[None, :] - grid.wavelet_w0
        spec = np.exp(-0.5 * arg * arg)
        for k in (-1, 1):  # sampling aliases; nonzero only near the wrap
            arg = a * (omega[None, :] + 2.0 * np.pi * k * fs) - grid.wavelet_w0
            near = np.abs(arg) < 9.0
            if near.any():
                spec[near] += np.exp(-0.5 * arg[near] ** 2)
        spec *= np.pi ** -0.25 * np.sqrt(2.0 * np.pi * a)
        block = sfft.ifft(s_fft[None, :] * spec, axis=1)
        coeffs[:, j0:j0 + chunk] = block[:, idx_t].T

    time_axis = idx_t * dt
    edge = (idx_t < m_max) | (idx_t > n - 1 - m_max)
    return coeffs, time_axis, freqs, edge


def cwt(signal: ComplexSignal, grid: TfGrid) -> Spectrogram:
    """Scalogram: magnitude of the Morlet wavelet coefficients."""
    coeffs, time_axis, freqs, edge = cwt_complex(signal, grid)
    params = {
        "wavelet_w0": grid.wavelet_w0,
        "edge_time_bins": [int(i) for i in np.flatnonzero(edge)],
    }
    return Spectrogram(np.abs(coeffs), time_axis, freqs,
                       TRANSFORM_WAVELET, params)


# ---------------------------------------------------------------------------
# bilinear distributions
# ---------------------------------------------------------------------------

def _lag_setup(signal: ComplexSignal, grid: TfGrid):
    n = signal.grid.n_samples
    if grid.window_length is None:
        m_max = n - 1
        window = np.ones(m_max + 1)
    else:
        if grid.window_length > n:
            raise DimensionError(
                f"lag window of {grid.window_length} exceeds the record "
                f"length {n}"
            )
        m_max = (grid.window_length - 1) // 2
        if grid.lag_window == "hamming":
            window = np.hamming(grid.window_length)[m_max:]
        else:
            window = np.ones(m_max + 1)
    return m_max, window


def _bilinear_values(signal: ComplexSignal, grid: TfGrid, r_pos: np.ndarray,
                     window: np.ndarray, idx_t: np.ndarray):
    """Fourier transform over lags of a Hermitian local autocorrelation.

    ``r_pos[m, t]`` holds lags m = 0..M at the selected time bins; negative
    lags follow from Hermitian symmetry, making the output exactly real.
    """
    fs = signal.grid.sample_rate_hz
    dt = signal.grid.dt
    freqs = grid.freq_axis_hz()
    if freqs[-1] > fs:
        raise ConfigurationError(
            f"frequency axis reaches {freqs[-1]:g} Hz beyond the sample "
            f"rate {fs:g} Hz"
        )
    m = np.arange(r_pos.shape[0])
    basis = (window[None, :]
             * np.exp(-2j * np.pi * freqs[:, None] * m[None, :] * dt))
    vals = 2.0 * np.real(basis @ r_pos) - window[0] * np.real(r_pos[0])[None, :]
    return dt * vals.T, idx_t * dt, freqs


def mhd(signal: ComplexSignal, grid: TfGrid) -> Spectrogram:
    """Margenau-Hill distribution of the record on the grid.

    Unwindowed (window_length=None) this equals
    Re{ s(t) * conj(S(f)) * exp(-2j*pi*f*t) } exactly, and possesses true
    marginals on the DFT frequency grid; a shorter Hamming lag window gives
    the pseudo variant with suppressed cross terms.
    """
    s = signal.samples
    n = signal.grid.n_samples
    m_max, window = _lag_setup(signal, grid)
    idx_t = grid.time_bin_indices(n)

    pad = np.zeros(n + 2 * m_max, dtype=np.complex128)
    pad[m_max:m_max + n] = s
    m = np.arange(m_max + 1)
    back = pad[idx_t[None, :] + m_max - m[:, None]]     # s[t-m]
    fwd = pad[idx_t[None, :] + m_max + m[:, None]]      # s[t+m]
    st = s[idx_t]
    r_pos = 0.5 * (st[None, :] * np.conj(back) + fwd * np.conj(st)[None, :])

    values, time_axis, freqs = _bilinear_values(signal, grid, r_pos, window, idx_t)
    params = {"window_length": grid.window_length, "lag_window": grid.lag_window}
    return Spectrogram(values, time_axis, freqs, TRANSFORM_MHD, params)


def bjd(signal: ComplexSignal, grid: TfGrid) -> Spectrogram:
    """Born-Jordan distribution of the record on the grid.

    For each lag the local autocorrelation is the uniform average of the
    half-shifted lag product over a window of half-width floor(a*|lag|)
    samples; the sinc-kernel cross-term smearing follows from that average.
    """
    s = signal.samples
    n = signal.grid.n_samples
    m_max, window = _lag_setup(signal, grid)
    idx_t = grid.time_bin_indices(n)

    pad = np.zeros(n + 2 * m_max, dtype=np.complex128)
    pad[m_max:m_max + n] = s
    r_pos = np.empty((m_max + 1, len(idx_t)), dtype=np.complex128)
    for m in range(m_max + 1):
        p = (m + 1) // 2
        q = m // 2
        # g[u] = s[u+p] * conj(s[u-q]) for u in 0..n-1, zeros off the record
        g = pad[m_max + p:m_max + p + n] * np.conj(pad[m_max - q:m_max - q + n])
        hw = int(grid.bjd_a * m)
        if hw == 0:
            r_pos[m] = g[idx_t]
            continue
        csum = np.concatenate(([0.0 + 0.0j], np.cumsum(g)))
        lo = np.clip(idx_t - hw, 0, n)
        hi = np.clip(idx_t + hw + 1, 0, n)
        r_pos[m] = (csum[hi] - csum[lo]) / (2 * hw + 1)

    values, time_axis, freqs = _bilinear_values(signal, grid, r_pos, window, idx_t)
    params = {"window_length": grid.window_length, "lag_window": grid.lag_window,
              "bjd_a": grid.bjd_a}
    return Spectrogram(values, time_axis, freqs, TRANSFORM_BJD, params)


_TRANSFORMS = {
    TRANSFORM_WAVELET: cwt,
    TRANSFORM_MHD: mhd,
    TRANSFORM_BJD: bjd,
}


def transform(signal: ComplexSignal, grid: TfGrid, kind: str) -> Spectrogram:
    if kind not in _TRANSFORMS:
        raise ConfigurationError(f"unknown transform kind {kind!r}")
    return _TRANSFORMS[kind](signal, grid)


# ---------------------------------------------------------------------------
# gray imaging and files
# ---------------------------------------------------------------------------

def to_gray(sp: Spectrogram) -> GrayImage:
    """Map |values| onto [0, 255] with the per-image peak at 255.

    Row 0 of the image is the lowest frequency, column 0 the earliest time;
    an all-zero spectrogram maps to an all-zero image.
    """
    mag = np.abs(sp.values).T  # rows = frequency, cols = time
    peak = mag.max()
    if peak > 0:
        pixels = np.minimum(mag * (255.0 / peak), 255.0)  # guard roundoff
    else:
        pixels = np.zeros_like(mag)
    return GrayImage(pixels, freq_axis_hz=sp.freq_axis_hz.copy())


def write_spectrogram(path: str, sp: Spectrogram) -> None:
    """Flat little-endian float32 matrix plus a ``.json`` sidecar."""
    data = sp.values.astype("<f4").tobytes()
    sidecar = {
        "format_version": SPECTROGRAM_FORMAT_VERSION,
        "dims": [int(d) for d in sp.values.shape],
        "time_axis_s": [float(x) for x in sp.time_axis_s],
        "freq_axis_hz": [float(x) for x in sp.freq_axis_hz],
        "transform_kind": sp.transform_kind,
        "params": sp.params,
    }
    tmp = path + ".tmp"
    with open(tmp, "wb") as f:
        f.write(data)
    os.replace(tmp, path)
    atomic_write_text(path + ".json", json.dumps(sidecar, sort_keys=True, indent=2))


def read_spectrogram(path: str) -> Spectrogram:
    with open(path + ".json", "r", encoding="utf-8") as f:
        sidecar = json.load(f)
    dims = tuple(sidecar["dims"])
    raw = np.fromfile(path, dtype="<f4")
    if raw.size != dims[0] * dims[1]:
        raise DimensionError("spectrogram file size does not match sidecar dims")
    return Spectrogram(
        raw.astype(np.float64).reshape(dims),
        np.asarray(sidecar["time_axis_s"]),
        np.asarray(sidecar["freq_axis_hz"]),
        sidecar["transform_kind"],
        sidecar.get("params", {}),
    )
