"""hopjam: frequency-hopping interference synthesis, composite
time-frequency imaging, and Siamese-network interference classification.

Modules:

* sigsynth -- FH signal + four interference waveform families, JSR, mixing
* tfa      -- Morlet scalogram, Margenau-Hill and Born-Jordan distributions
* imgprep  -- normalization, binarization, cropping, resizing, compositing
* pipeline -- signal-to-composite rendering chain
* dataset  -- 10-class corpus generation, manifests, matching pairs
* siamese  -- from-scratch twin network, training, evaluation, checkpoints
* presets  -- 'desk' (CI-scale) and 'paper' (full-scale) run configurations
* cli      -- the ``hopjam`` command-line tool
"""

from . import cli, dataset, imgprep, pipeline, presets, siamese, sigsynth, tfa
from .errors import HopjamError

__all__ = [
    "HopjamError",
    "cli",
    "dataset",
    "imgprep",
    "pipeline",
    "presets",
    "siamese",
    "sigsynth",
    "tfa",
]

__version__ = "0.1.0"
