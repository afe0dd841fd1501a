"""Walk through the signal layer: the frequency-hopping waveform, the four
interference families, JSR scaling and noise mixing.

Run:  python3 demos/01_signal_synthesis.py
"""

import numpy as np

from hopjam import sigsynth as ss

# A 1 MHz grid keeps every waveform here comfortably below Nyquist while
# staying quick to synthesize; 50 ms at 100 hops/s gives 5 hop segments.
grid = ss.SamplingGrid.from_duration(1e6, 0.05)
print(f"grid: {grid.n_samples} samples at {grid.sample_rate_hz:g} Hz")

# --- the desired frequency-hopping signal --------------------------------
fh = ss.default_fh_params(n_freqs=16, band_hz=(100e3, 220e3),
                          hop_sequence_seed=7)
desired = ss.gen_fh_signal(fh, grid, seed=42)
print(f"FH signal: constant envelope |s| = {np.abs(desired.samples).max():.3f}, "
      f"{fh.n_hop_freqs} hop frequencies, "
      f"{fh.symbol_rate_hz / fh.hop_rate_hops_per_s:.0f} symbols per hop")

# A phase-differencing estimate shows the hop plateaus.
f_inst = np.angle(desired.samples[1:] * np.conj(desired.samples[:-1]))
f_inst *= grid.sample_rate_hz / (2 * np.pi)
hop_len = int(grid.sample_rate_hz / fh.hop_rate_hops_per_s)
plateaus = [np.median(f_inst[i * hop_len + 10:(i + 1) * hop_len - 10]) / 1e3
            for i in range(5)]
print("hop plateaus (kHz):", [f"{p:.0f}" for p in plateaus])

# --- the four interference families --------------------------------------
tone = ss.FixedToneSpec(freqs_hz=(80e3, 160e3), amplitudes=(1.0, 0.8),
                        phases_rad=(0.0, 1.0))
sweep = ss.LinearSweepSpec(amplitude=1.0, start_hz=20e3,
                           slope_hz_per_s=80e3 / 2e-3, phase_rad=0.0,
                           period_s=2e-3)
pulse = ss.PeriodicPulseSpec(amplitude=1.0, period_s=5e-5, width_s=2e-5)
comb = ss.CombSpectrumSpec(freqs_hz=(90e3, 130e3, 170e3, 210e3),
                           amplitudes=(1.0,) * 4, phases_rad=(0.0,) * 4)

for spec in (tone, sweep, pulse, comb):
    jam = ss.gen_interference(spec, grid)
    print(f"{spec.kind:15s} band {spec.band_hz(grid)[0] / 1e3:6.0f}.."
          f"{spec.band_hz(grid)[1] / 1e3:6.0f} kHz  "
          f"mean |J| = {ss.average_amplitude(jam):.3f}")
print(f"pulse duty factor: {pulse.duty_factor:.2f} "
      f"(fraction of nonzero samples "
      f"{np.mean(ss.gen_periodic_pulse(pulse, grid).samples.real != 0):.2f})")

# --- JSR scaling and the received record ---------------------------------
for jsr_db in (-10.0, 0.0, 20.0):
    scaled = ss.scale_to_jsr(ss.gen_interference(sweep, grid), desired, jsr_db)
    print(f"requested JSR {jsr_db:+6.1f} dB -> measured "
          f"{ss.measure_jsr(scaled, desired):+.6f} dB")

scenario = ss.ScenarioSpec(
    fh=fh,
    interferences=(tone, sweep),
    jsr_db=5.0,
    noise_snr_db=15.0,
    rng_seed=42,
)
received = ss.synthesize_scenario(scenario, grid)
print(f"received record r = s + J1 + J2 + n: mean power "
      f"{np.mean(np.abs(received.samples) ** 2):.3f}")
print(f"active band for cropping: "
      f"{ss.scenario_band_hz(scenario, grid)[0] / 1e3:.0f}.."
      f"{ss.scenario_band_hz(scenario, grid)[1] / 1e3:.0f} kHz")
