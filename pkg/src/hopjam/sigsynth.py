"""Synthesis of frequency-hopping signals and interference waveforms.

The received record is modeled as the desired frequency-hopping signal plus
one or two interference waveforms plus optional white Gaussian noise. Four
interference families are provided:

* fixed tone      -- sum of N constant sinusoids
* linear sweep    -- periodically repeating linear chirp
* periodic pulse  -- rectangular pulse train (baseband by default)
* comb spectrum   -- N discrete narrowband teeth across a band

All generators return analytic (complex baseband) records so that bilinear
time-frequency distributions are free of negative-frequency aliasing; the
real part of each record matches the textbook real-valued waveform. Every
generator is a pure function of (spec, grid, seed) and bit-reproducible.

The interference strength is set by the jamming-to-signal ratio

    JSR_dB = 20 * log10(V_jam / V_sig)

where V is by default the mean of |samples| ("average amplitude"); an RMS
variant is available via ``mode="rms"``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields
from typing import Optional, Sequence, Union

import numpy as np

from .errors import (
    ConfigurationError,
    DegenerateInputError,
    DimensionError,
)
from .fileio import atomic_write_bytes, atomic_write_text
from .rng import child_rng

SIGNAL_FORMAT_VERSION = 1

KIND_FIXED_TONE = "fixed_tone"
KIND_LINEAR_SWEEP = "linear_sweep"
KIND_PERIODIC_PULSE = "periodic_pulse"
KIND_COMB_SPECTRUM = "comb_spectrum"

#: Canonical ordering of the four interference families.
INTERFERENCE_KINDS = (
    KIND_FIXED_TONE,
    KIND_LINEAR_SWEEP,
    KIND_PERIODIC_PULSE,
    KIND_COMB_SPECTRUM,
)


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SamplingGrid:
    """Uniform sampling grid: rate, duration and derived sample count."""

    sample_rate_hz: float
    duration_s: float
    n_samples: int

    def __post_init__(self):
        if self.sample_rate_hz <= 0 or self.duration_s <= 0:
            raise ConfigurationError("sample rate and duration must be positive")
        expected = int(round(self.sample_rate_hz * self.duration_s))
        if self.n_samples != expected:
            raise ConfigurationError(
                f"n_samples={self.n_samples} inconsistent with "
                f"rate*duration={expected}"
            )

    @classmethod
    def from_duration(cls, sample_rate_hz: float, duration_s: float) -> "SamplingGrid":
        return cls(sample_rate_hz, duration_s,
                   int(round(sample_rate_hz * duration_s)))

    @property
    def dt(self) -> float:
        return 1.0 / self.sample_rate_hz

    @property
    def nyquist_hz(self) -> float:
        return self.sample_rate_hz / 2.0

    def times(self) -> np.ndarray:
        return np.arange(self.n_samples) / self.sample_rate_hz


@dataclass(frozen=True)
class ComplexSignal:
    """Uniformly sampled complex baseband record."""

    grid: SamplingGrid
    samples: np.ndarray

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.complex128)
        object.__setattr__(self, "samples", samples)
        if samples.ndim != 1 or len(samples) != self.grid.n_samples:
            raise DimensionError(
                f"samples length {samples.shape} does not match grid "
                f"n_samples={self.grid.n_samples}"
            )
        if not np.all(np.isfinite(samples.view(np.float64))):
            raise DegenerateInputError("signal contains non-finite samples")

    def scaled(self, factor: float) -> "ComplexSignal":
        return ComplexSignal(self.grid, self.samples * factor)


def _check_nyquist(grid: SamplingGrid, freq_hz: float, what: str) -> None:
    if freq_hz >= grid.nyquist_hz:
        raise ConfigurationError(
            f"{what} {freq_hz:g} Hz is at or above Nyquist "
            f"({grid.nyquist_hz:g} Hz)"
        )


@dataclass(frozen=True)
class FhParams:
    """Frequency-hopping signal parameters.

    ``freq_set_hz`` is the ordered hop frequency set; the hop sequence is a
    seeded uniform draw over it with no immediate repetition.
    """

    freq_set_hz: tuple
    hop_rate_hops_per_s: float = 100.0
    modulation: str = "bpsk"
    symbol_rate_hz: float = 1000.0
    hop_sequence_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "freq_set_hz", tuple(float(f) for f in self.freq_set_hz))
        if len(self.freq_set_hz) == 0:
            raise ConfigurationError("hop frequency set is empty")
        if self.modulation != "bpsk":
            raise ConfigurationError(f"unsupported modulation {self.modulation!r}")
        if self.hop_rate_hops_per_s <= 0 or self.symbol_rate_hz <= 0:
            raise ConfigurationError("hop and symbol rates must be positive")

    @property
    def n_hop_freqs(self) -> int:
        return len(self.freq_set_hz)

    def band_hz(self) -> tuple:
        return (min(self.freq_set_hz), max(self.freq_set_hz))


def default_fh_params(n_freqs: int = 16,
                      band_hz: tuple = (100e3, 220e3),
                      hop_rate_hops_per_s: float = 100.0,
                      hop_sequence_seed: int = 0) -> FhParams:
    """Hop set of ``n_freqs`` evenly spaced frequencies across ``band_hz``.

    The symbol rate defaults to 10 symbols per hop so the modulation
    sidelobes stay narrow relative to the hop band.
    """
    freqs = tuple(np.linspace(band_hz[0], band_hz[1], n_freqs))
    return FhParams(
        freq_set_hz=freqs,
        hop_rate_hops_per_s=hop_rate_hops_per_s,
        symbol_rate_hz=10.0 * hop_rate_hops_per_s,
        hop_sequence_seed=hop_sequence_seed,
    )


@dataclass(frozen=True)
class FixedToneSpec:
    """Sum of N fixed sinusoids A_i * cos(2 pi f_i t + phi_i)."""

    freqs_hz: tuple
    amplitudes: tuple
    phases_rad: tuple

    kind = KIND_FIXED_TONE

    def __post_init__(self):
        freqs = tuple(float(f) for f in self.freqs_hz)
        amps = tuple(float(a) for a in self.amplitudes)
        phases = tuple(float(p) for p in self.phases_rad)
        object.__setattr__(self, "freqs_hz", freqs)
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "phases_rad", phases)
        if len(freqs) == 0:
            raise ConfigurationError("fixed tone needs at least one frequency")
        if not (len(freqs) == len(amps) == len(phases)):
            raise ConfigurationError("freqs, amplitudes, phases must align")

    def band_hz(self, grid: SamplingGrid) -> tuple:
        return (min(self.freqs_hz), max(self.freqs_hz))


@dataclass(frozen=True)
class LinearSweepSpec:
    """Periodic linear chirp: within each period of length ``period_s``,

        J(t) = A * cos(2 pi f0 t' + pi mu0 t'^2 + phi0),   t' = t mod period

    so the instantaneous frequency ramps from f0 at slope mu0 (Hz/s) and
    snaps back each period (sawtooth)."""

    amplitude: float
    start_hz: float
    slope_hz_per_s: float
    phase_rad: float
    period_s: float

    kind = KIND_LINEAR_SWEEP

    def __post_init__(self):
        if self.period_s <= 0:
            raise ConfigurationError("sweep period must be positive")
        if self.start_hz < 0:
            raise ConfigurationError("sweep start frequency must be >= 0")

    @property
    def bandwidth_hz(self) -> float:
        return self.slope_hz_per_s * self.period_s

    def band_hz(self, grid: SamplingGrid) -> tuple:
        lo = min(self.start_hz, self.start_hz + self.bandwidth_hz)
        hi = max(self.start_hz, self.start_hz + self.bandwidth_hz)
        return (lo, hi)


@dataclass(frozen=True)
class PeriodicPulseSpec:
    """Rectangular pulse train of amplitude A, period T, width tau.

    Stored at baseband by default (samples are A inside each pulse and 0
    between pulses); an optional carrier turns each pulse into a complex
    exponential burst."""

    amplitude: float
    period_s: float
    width_s: float
    carrier_hz: Optional[float] = None

    kind = KIND_PERIODIC_PULSE

    def __post_init__(self):
        if not (0.0 < self.width_s < self.period_s):
            raise ConfigurationError(
                f"pulse width {self.width_s:g} must satisfy 0 < width < "
                f"period {self.period_s:g}"
            )

    @property
    def duty_factor(self) -> float:
        return self.width_s / self.period_s

    def band_hz(self, grid: SamplingGrid) -> tuple:
        # Broadband: spectral lines at k/T under a sinc envelope whose main
        # lobe reaches 1/width. Use that as the nominal extent.
        hi = min(1.0 / self.width_s, grid.nyquist_hz)
        if self.carrier_hz:
            return (max(self.carrier_hz - hi, 0.0),
                    min(self.carrier_hz + hi, grid.nyquist_hz))
        return (0.0, hi)


@dataclass(frozen=True)
class CombSpectrumSpec:
    """N discrete teeth: sum of A_i * cos(2 pi f_i t + phi_i), N >= 2,
    with strictly increasing distinct tooth frequencies."""

    freqs_hz: tuple
    amplitudes: tuple
    phases_rad: tuple

    kind = KIND_COMB_SPECTRUM

    def __post_init__(self):
        freqs = tuple(float(f) for f in self.freqs_hz)
        amps = tuple(float(a) for a in self.amplitudes)
        phases = tuple(float(p) for p in self.phases_rad)
        object.__setattr__(self, "freqs_hz", freqs)
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "phases_rad", phases)
        if len(freqs) < 2:
            raise ConfigurationError(
                "comb spectrum needs at least 2 teeth; use a fixed tone for N=1"
            )
        if not (len(freqs) == len(amps) == len(phases)):
            raise ConfigurationError("freqs, amplitudes, phases must align")
        if any(b <= a for a, b in zip(freqs, freqs[1:])):
            raise ConfigurationError(
                "comb tooth frequencies must be strictly increasing and distinct"
            )

    def band_hz(self, grid: SamplingGrid) -> tuple:
        return (self.freqs_hz[0], self.freqs_hz[-1])


Interference = Union[FixedToneSpec, LinearSweepSpec, PeriodicPulseSpec,
                     CombSpectrumSpec]

_KIND_TO_CLS = {
    KIND_FIXED_TONE: FixedToneSpec,
    KIND_LINEAR_SWEEP: LinearSweepSpec,
    KIND_PERIODIC_PULSE: PeriodicPulseSpec,
    KIND_COMB_SPECTRUM: CombSpectrumSpec,
}


@dataclass(frozen=True)
class ScenarioSpec:
    """A full received-signal scenario: desired FH signal, one or two
    interferences, the target JSR and optional noise SNR."""

    fh: FhParams
    interferences: tuple
    jsr_db: float
    noise_snr_db: Optional[float] = None
    rng_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "interferences", tuple(self.interferences))
        if not 1 <= len(self.interferences) <= 2:
            raise ConfigurationError(
                "a scenario carries exactly 1 or 2 interferences"
            )


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------

def gen_fh_signal(fh: FhParams, grid: SamplingGrid, seed: int = 0,
                  amplitude: float = 1.0) -> ComplexSignal:
    """Constant-envelope BPSK frequency-hopping signal.

    The carrier switches every 1/hop_rate seconds to a pseudo-randomly
    chosen member of the hop set (seeded by ``fh.hop_sequence_seed``, no
    immediate repetition); the phase flips by pi at symbol boundaries
    according to random data bits drawn from ``seed``.
    """
    _check_nyquist(grid, max(fh.freq_set_hz), "hop frequency")
    t = grid.times()

    n_hops = int(np.ceil(grid.duration_s * fh.hop_rate_hops_per_s - 1e-12))
    hop_of_sample = np.minimum(
        (t * fh.hop_rate_hops_per_s).astype(np.int64), n_hops - 1)

    hop_rng = child_rng(fh.hop_sequence_seed)
    k = fh.n_hop_freqs
    seq = np.empty(n_hops, dtype=np.int64)
    seq[0] = hop_rng.integers(k)
    for i in range(1, n_hops):
        if k == 1:
            seq[i] = 0
        else:
            step = hop_rng.integers(1, k)  # skip the previous index
            seq[i] = (seq[i - 1] + step) % k
    freq_per_sample = np.asarray(fh.freq_set_hz)[seq[hop_of_sample]]

    n_symbols = int(np.ceil(grid.duration_s * fh.symbol_rate_hz - 1e-12))
    sym_of_sample = np.minimum(
        (t * fh.symbol_rate_hz).astype(np.int64), n_symbols - 1)
    bits = child_rng(seed).integers(0, 2, size=n_symbols)

    phase = 2.0 * np.pi * freq_per_sample * t + np.pi * bits[sym_of_sample]
    return ComplexSignal(grid, amplitude * np.exp(1j * phase))


def gen_fixed_tone(spec: FixedToneSpec, grid: SamplingGrid) -> ComplexSignal:
    for f in spec.freqs_hz:
        _check_nyquist(grid, f, "tone frequency")
    t = grid.times()
    samples = np.zeros(grid.n_samples, dtype=np.complex128)
    for a, f, p in zip(spec.amplitudes, spec.freqs_hz, spec.phases_rad):
        samples += a * np.exp(1j * (2.0 * np.pi * f * t + p))
    return ComplexSignal(grid, samples)


def gen_linear_sweep(spec: LinearSweepSpec, grid: SamplingGrid) -> ComplexSignal:
    end_hz = spec.start_hz + spec.slope_hz_per_s * spec.period_s
    if not 0.0 <= end_hz < grid.nyquist_hz:
        raise ConfigurationError(
            f"sweep reaches {end_hz:g} Hz within one period, outside "
            f"[0, Nyquist={grid.nyquist_hz:g})"
        )
    _check_nyquist(grid, spec.start_hz, "sweep start frequency")
    tp = np.mod(grid.times(), spec.period_s)
    phase = (2.0 * np.pi * spec.start_hz * tp
             + np.pi * spec.slope_hz_per_s * tp * tp
             + spec.phase_rad)
    return ComplexSignal(grid, spec.amplitude * np.exp(1j * phase))


def gen_periodic_pulse(spec: PeriodicPulseSpec, grid: SamplingGrid) -> ComplexSignal:
    t = grid.times()
    gate = (np.mod(t, spec.period_s) < spec.width_s)
    if spec.carrier_hz is None:
        samples = spec.amplitude * gate.astype(np.complex128)
    else:
        _check_nyquist(grid, spec.carrier_hz, "pulse carrier")
        samples = np.where(
            gate,
            spec.amplitude * np.exp(2j * np.pi * spec.carrier_hz * t),
            0.0 + 0.0j,
        )
    return ComplexSignal(grid, samples)


def gen_comb_spectrum(spec: CombSpectrumSpec, grid: SamplingGrid) -> ComplexSignal:
    for f in spec.freqs_hz:
        _check_nyquist(grid, f, "comb tooth frequency")
    t = grid.times()
    samples = np.zeros(grid.n_samples, dtype=np.complex128)
    for a, f, p in zip(spec.amplitudes, spec.freqs_hz, spec.phases_rad):
        samples += a * np.exp(1j * (2.0 * np.pi * f * t + p))
    return ComplexSignal(grid, samples)


_GENERATORS = {
    KIND_FIXED_TONE: gen_fixed_tone,
    KIND_LINEAR_SWEEP: gen_linear_sweep,
    KIND_PERIODIC_PULSE: gen_periodic_pulse,
    KIND_COMB_SPECTRUM: gen_comb_spectrum,
}


def gen_interference(spec: Interference, grid: SamplingGrid) -> ComplexSignal:
    """Dispatch to the generator matching ``spec.kind``."""
    return _GENERATORS[spec.kind](spec, grid)


# ---------------------------------------------------------------------------
# amplitude measurement, JSR, mixing
# ---------------------------------------------------------------------------

def average_amplitude(sig: ComplexSignal, mode: str = "mean_abs") -> float:
    """V in the JSR definition: mean |samples| by default, RMS optionally."""
    mag = np.abs(sig.samples)
    if mode == "mean_abs":
        return float(np.mean(mag))
    if mode == "rms":
        return float(np.sqrt(np.mean(mag * mag)))
    raise ConfigurationError(f"unknown amplitude mode {mode!r}")


def measure_jsr(jam: ComplexSignal, sig: ComplexSignal,
                mode: str = "mean_abs") -> float:
    """JSR in dB: 20*log10(V_jam / V_sig)."""
    v_sig = average_amplitude(sig, mode)
    v_jam = average_amplitude(jam, mode)
    if v_sig == 0.0 or v_jam == 0.0:
        raise DegenerateInputError("JSR undefined for an all-zero record")
    return 20.0 * np.log10(v_jam / v_sig)


def scale_to_jsr(jam: ComplexSignal, sig: ComplexSignal, jsr_db: float,
                 mode: str = "mean_abs") -> ComplexSignal:
    """Rescale ``jam`` so that measure_jsr(result, sig) == jsr_db."""
    v_sig = average_amplitude(sig, mode)
    v_jam = average_amplitude(jam, mode)
    if v_sig == 0.0:
        raise DegenerateInputError("reference signal has zero average amplitude")
    if v_jam == 0.0:
        raise DegenerateInputError("interference has zero average amplitude")
    target = 10.0 ** (jsr_db / 20.0) * v_sig
    return jam.scaled(target / v_jam)


def awgn_like(sig: ComplexSignal, snr_db: float, seed: int = 0) -> ComplexSignal:
    """Complex white Gaussian noise at ``snr_db`` below the power of ``sig``."""
    p_sig = float(np.mean(np.abs(sig.samples) ** 2))
    if p_sig == 0.0:
        raise DegenerateInputError("SNR undefined relative to an all-zero signal")
    p_noise = p_sig / 10.0 ** (snr_db / 10.0)
    rng = child_rng(seed)
    scale = np.sqrt(p_noise / 2.0)
    noise = scale * (rng.standard_normal(sig.grid.n_samples)
                     + 1j * rng.standard_normal(sig.grid.n_samples))
    return ComplexSignal(sig.grid, noise)


def mix(sig: ComplexSignal, jams: Sequence[ComplexSignal],
        noise_snr_db: Optional[float] = None, noise_seed: int = 0) -> ComplexSignal:
    """r = sig + sum(jams) + noise (noise relative to ``sig``; None = off).

    Jams are accumulated in a canonical content-derived order so the result
    is bit-exact under any permutation of the jam list.
    """
    for jam in jams:
        if jam.grid != sig.grid:
            raise DimensionError("all mixed records must share one sampling grid")
    total = sig.samples.copy()
    for jam in sorted(jams, key=lambda j: j.samples.tobytes()):
        total = total + jam.samples
    if noise_snr_db is not None:
        total = total + awgn_like(sig, noise_snr_db, seed=noise_seed).samples
    return ComplexSignal(sig.grid, total)


def scenario_parts(scenario: ScenarioSpec, grid: SamplingGrid) -> tuple:
    """(desired FH signal, JSR-scaled total interference) for a scenario.

    When two interferences are present their sum (with the per-interference
    amplitudes already applied) is scaled as one waveform to the target JSR.
    """
    desired = gen_fh_signal(scenario.fh, grid, seed=scenario.rng_seed)
    jam_sum = np.zeros(grid.n_samples, dtype=np.complex128)
    for spec in scenario.interferences:
        jam_sum += gen_interference(spec, grid).samples
    jam = scale_to_jsr(ComplexSignal(grid, jam_sum), desired, scenario.jsr_db)
    return desired, jam


def synthesize_scenario(scenario: ScenarioSpec, grid: SamplingGrid) -> ComplexSignal:
    """Render a full scenario: FH signal + JSR-scaled interference + noise."""
    desired, jam = scenario_parts(scenario, grid)
    return mix(desired, [jam], scenario.noise_snr_db,
               noise_seed=scenario.rng_seed)


def scenario_band_hz(scenario: ScenarioSpec, grid: SamplingGrid) -> tuple:
    """Active band spanned by the FH signal and all interferences, used for
    frequency-domain cropping."""
    lo, hi = scenario.fh.band_hz()
    for spec in scenario.interferences:
        b = spec.band_hz(grid)
        lo = min(lo, b[0])
        hi = max(hi, b[1])
    return (lo, hi)


# ---------------------------------------------------------------------------
# JSON serialization (documented schema, see README)
# ---------------------------------------------------------------------------

def _spec_to_dict(spec: Interference) -> dict:
    d = {"kind": spec.kind}
    for f in fields(spec):
        v = getattr(spec, f.name)
        d[f.name] = list(v) if isinstance(v, tuple) else v
    return d


def _spec_from_dict(d: dict) -> Interference:
    d = dict(d)
    kind = d.pop("kind", None)
    if kind not in _KIND_TO_CLS:
        raise ConfigurationError(f"unknown interference kind {kind!r}")
    cls = _KIND_TO_CLS[kind]
    names = {f.name for f in fields(cls)}
    unknown = set(d) - names
    if unknown:
        raise ConfigurationError(f"unknown fields for {kind}: {sorted(unknown)}")
    try:
        return cls(**d)
    except TypeError as exc:
        raise ConfigurationError(str(exc)) from exc


def scenario_to_dict(scenario: ScenarioSpec) -> dict:
    return {
        "fh": {
            "freq_set_hz": list(scenario.fh.freq_set_hz),
            "hop_rate_hops_per_s": scenario.fh.hop_rate_hops_per_s,
            "modulation": scenario.fh.modulation,
            "symbol_rate_hz": scenario.fh.symbol_rate_hz,
            "hop_sequence_seed": scenario.fh.hop_sequence_seed,
        },
        "interferences": [_spec_to_dict(s) for s in scenario.interferences],
        "jsr_db": scenario.jsr_db,
        "noise_snr_db": scenario.noise_snr_db,
        "rng_seed": scenario.rng_seed,
    }


def scenario_from_dict(d: dict) -> ScenarioSpec:
    try:
        fh = FhParams(**{k: (tuple(v) if k == "freq_set_hz" else v)
                         for k, v in d["fh"].items()})
        return ScenarioSpec(
            fh=fh,
            interferences=tuple(_spec_from_dict(s) for s in d["interferences"]),
            jsr_db=float(d["jsr_db"]),
            noise_snr_db=(None if d.get("noise_snr_db") is None
                          else float(d["noise_snr_db"])),
            rng_seed=int(d.get("rng_seed", 0)),
        )
    except (KeyError, TypeError) as exc:
        raise ConfigurationError(f"malformed scenario spec: {exc}") from exc


# ---------------------------------------------------------------------------
# signal files: interleaved little-endian float32 (re, im) + JSON sidecar
# ---------------------------------------------------------------------------

def write_signal(path: str, sig: ComplexSignal,
                 scenario: Optional[ScenarioSpec] = None,
                 seed: Optional[int] = None) -> None:
    """Write interleaved (re, im) float32 LE plus a ``.json`` sidecar."""
    inter = np.empty(2 * sig.grid.n_samples, dtype="<f4")
    inter[0::2] = sig.samples.real
    inter[1::2] = sig.samples.imag
    sidecar = {
        "format_version": SIGNAL_FORMAT_VERSION,
        "sample_rate_hz": sig.grid.sample_rate_hz,
        "n_samples": sig.grid.n_samples,
        "scenario_spec": (None if scenario is None
                          else scenario_to_dict(scenario)),
        "seed": seed,
    }
    atomic_write_bytes(path, inter.tobytes())
    atomic_write_text(path + ".json", json.dumps(sidecar, sort_keys=True, indent=2))


def read_signal(path: str) -> tuple:
    """Read a signal file; returns (ComplexSignal, sidecar dict)."""
    with open(path + ".json", "r", encoding="utf-8") as f:
        sidecar = json.load(f)
    raw = np.fromfile(path, dtype="<f4")
    n = int(sidecar["n_samples"])
    if len(raw) != 2 * n:
        raise DimensionError(
            f"signal file holds {len(raw)//2} samples, sidecar says {n}"
        )
    samples = raw[0::2].astype(np.float64) + 1j * raw[1::2].astype(np.float64)
    rate = float(sidecar["sample_rate_hz"])
    grid = SamplingGrid(rate, n / rate, n)
    return ComplexSignal(grid, samples), sidecar
