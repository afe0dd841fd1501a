"""The three time-frequency representations and what makes each one useful:
the Morlet scalogram (linear, cross-term free), the Margenau-Hill
distribution (true marginals) and the Born-Jordan distribution (sharper,
with midpoint cross terms that the classifier exploits as features).

Run:  python3 demos/02_time_frequency_transforms.py
Writes three PGM images of a tone + sweep mixture to demos/out/.
"""

import os

import numpy as np

from hopjam import imgprep, sigsynth as ss, tfa

OUT = os.path.join(os.path.dirname(__file__), "out")
os.makedirs(OUT, exist_ok=True)

FS = 1e6
grid = ss.SamplingGrid.from_duration(FS, 0.02)

tone = ss.gen_fixed_tone(
    ss.FixedToneSpec(freqs_hz=(150e3,), amplitudes=(1.0,), phases_rad=(0.0,)),
    grid)
sweep = ss.gen_linear_sweep(
    ss.LinearSweepSpec(amplitude=1.0, start_hz=50e3,
                       slope_hz_per_s=200e3 / 10e-3, phase_rad=0.0,
                       period_s=10e-3),
    grid)
mixture = ss.mix(tone, [sweep], None)

tf = tfa.TfGrid(n_time_bins=200, n_freq_bins=160,
                freq_range_hz=(20e3, 300e3), window_length=257)
for kind in tfa.TRANSFORM_KINDS:
    sp = tfa.transform(mixture, tf, kind)
    path = os.path.join(OUT, f"tone_plus_sweep_{kind}.pgm")
    imgprep.write_pgm(path, tfa.to_gray(sp))
    print(f"{kind:8s} -> {path}  (peak |value| {np.abs(sp.values).max():.4g})")

# --- marginality of the Margenau-Hill distribution ------------------------
short = ss.SamplingGrid.from_duration(1e3, 0.256)
probe = ss.ComplexSignal(
    short, 1.3 * np.exp(2j * np.pi * 125.0 * short.times()))
mh = tfa.mhd(probe, tfa.dft_grid(probe))
marginal = mh.values.sum(axis=1) * (short.sample_rate_hz / short.n_samples)
power = np.abs(probe.samples) ** 2
print(f"MHD time marginal vs |s(t)|^2: max deviation "
      f"{np.max(np.abs(marginal - power)):.2e} (instantaneous power "
      f"{power[0]:.2f})")

# --- Born-Jordan cross terms ----------------------------------------------
two = ss.ComplexSignal(short, np.exp(2j * np.pi * 180.0 * short.times())
                       + np.exp(2j * np.pi * 220.0 * short.times()))
bj = tfa.bjd(two, tfa.TfGrid(n_time_bins=64, n_freq_bins=101,
                             freq_range_hz=(50.0, 450.0),
                             window_length=None))
mid = np.argmin(np.abs(bj.freq_axis_hz - 200.0))
ratio = np.abs(bj.values[:, mid]).mean() / np.abs(bj.values).max()
print(f"Born-Jordan midpoint cross-term mass for tones at 180/220 Hz: "
      f"{100 * ratio:.1f}% of peak")
