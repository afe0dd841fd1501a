"""From a received record to the network input: gray rendering,
normalization, global-threshold binarization, frequency cropping,
nearest-neighbor resizing and RGB compositing.

Run:  python3 demos/03_image_pipeline.py
Writes the step-by-step images of one scenario to demos/out/.
"""

import os

import numpy as np

from hopjam import imgprep, pipeline, sigsynth as ss, tfa

OUT = os.path.join(os.path.dirname(__file__), "out")
os.makedirs(OUT, exist_ok=True)

grid = ss.SamplingGrid.from_duration(1e6, 0.05)
scenario = ss.ScenarioSpec(
    fh=ss.default_fh_params(hop_sequence_seed=3),
    interferences=(
        ss.FixedToneSpec(freqs_hz=(80e3,), amplitudes=(1.2,), phases_rad=(0.0,)),
        ss.LinearSweepSpec(amplitude=1.0, start_hz=30e3,
                           slope_hz_per_s=70e3 / 2.5e-3, phase_rad=0.0,
                           period_s=2.5e-3),
    ),
    jsr_db=0.0,
    rng_seed=11,
)
signal = ss.synthesize_scenario(scenario, grid)
band = ss.scenario_band_hz(scenario, grid)
tf = tfa.TfGrid(n_time_bins=128, n_freq_bins=128, freq_range_hz=(4e3, 360e3))
prep = pipeline.PrepConfig(side=40)

sp = tfa.cwt(signal, tf)
gray = tfa.to_gray(sp)
imgprep.write_pgm(os.path.join(OUT, "step1_gray.pgm"), gray)
print(f"gray image {gray.pixels.shape}, peak {gray.pixels.max():.0f}")

norm = imgprep.normalize(gray, a_min=0.0, a_max=137.0)
print(f"normalized to [0, 1]: fraction clipped high "
      f"{np.mean(gray.pixels >= 137.0):.3f}")

binary = imgprep.binarize(norm)
print(f"binarized: ink fraction {binary.pixels.mean():.3f} "
      f"(threshold from the class-means iteration)")

cropped = imgprep.crop_band(binary, band, margin_frac=0.05)
print(f"cropped to {band[0] / 1e3:.0f}..{band[1] / 1e3:.0f} kHz "
      f"(+5% margin): {binary.pixels.shape[0]} -> {cropped.pixels.shape[0]} rows")

small = imgprep.resize_nn(cropped, prep.side)
print(f"resized (nearest neighbor) to {small.pixels.shape}; "
      f"values still binary: {sorted(np.unique(small.pixels))}")

comp = pipeline.render_composite(signal, tf, band, prep)
imgprep.write_ppm(os.path.join(OUT, "step5_composite.ppm"), comp)
print(f"composite (R=wavelet, G=MHD, B=BJD) side {comp.side} -> "
      f"{os.path.join(OUT, 'step5_composite.ppm')}")
print("channel ink fractions R/G/B:",
      [f"{c.pixels.mean():.2f}" for c in imgprep.decompose(comp)])
