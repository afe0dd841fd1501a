"""Signal-to-composite rendering pipeline.

One composite image per record: each of the three transforms is rendered to
gray, normalized, binarized, band-cropped and resized, then the three
binary channels are composed (wavelet -> R, Margenau-Hill -> G,
Born-Jordan -> B). The pipeline is pure: identical inputs produce
bit-identical composites.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import imgprep, tfa
from .sigsynth import ComplexSignal


@dataclass(frozen=True)
class PrepConfig:
    """Image-preparation parameters applied identically to all channels."""

    a_min: float = 0.0
    a_max: float = 137.0
    margin_frac: float = 0.05
    side: int = 105


def prep_channel(sp: tfa.Spectrogram, band_hz: tuple,
                 prep: PrepConfig) -> imgprep.BinaryImage:
    """Gray -> normalize -> binarize -> crop -> resize for one channel."""
    img = tfa.to_gray(sp)
    img = imgprep.normalize(img, prep.a_min, prep.a_max)
    binary = imgprep.binarize(img)
    binary = imgprep.crop_band(binary, band_hz, prep.margin_frac)
    return imgprep.resize_nn(binary, prep.side)


def render_spectrograms(signal: ComplexSignal, grid: tfa.TfGrid) -> dict:
    """All three transforms of one record, keyed by transform kind."""
    return {kind: tfa.transform(signal, grid, kind)
            for kind in tfa.TRANSFORM_KINDS}


def compose_channels(sps: dict, band_hz: tuple,
                     prep: PrepConfig) -> imgprep.CompositeImage:
    return imgprep.compose(
        prep_channel(sps[tfa.TRANSFORM_WAVELET], band_hz, prep),
        prep_channel(sps[tfa.TRANSFORM_MHD], band_hz, prep),
        prep_channel(sps[tfa.TRANSFORM_BJD], band_hz, prep),
    )


def render_composite(signal: ComplexSignal, grid: tfa.TfGrid, band_hz: tuple,
                     prep: PrepConfig) -> imgprep.CompositeImage:
    return compose_channels(render_spectrograms(signal, grid), band_hz, prep)
