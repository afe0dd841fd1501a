"""Gray-image preprocessing: normalization, iterative global-threshold
binarization, frequency-band cropping, nearest-neighbor resizing and
three-channel compositing.

The standard pipeline order is

    to_gray -> normalize -> binarize -> crop_band -> resize_nn -> compose

with the channel convention wavelet -> R, Margenau-Hill -> G,
Born-Jordan -> B. All operations are pure; identical inputs yield
bit-identical outputs.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (
    ConfigurationError,
    ConvergenceError,
    CropError,
    DimensionError,
)
from .fileio import atomic_write_bytes


@dataclass(frozen=True)
class GrayImage:
    """H x W gray matrix, [0, 255] before normalization or [0, 1] after.

    ``freq_axis_hz`` gives the center frequency of each row (row 0 is the
    lowest frequency) and is required for band cropping.
    """

    pixels: np.ndarray
    freq_axis_hz: Optional[np.ndarray] = None

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float64)
        object.__setattr__(self, "pixels", px)
        if px.ndim != 2:
            raise DimensionError("gray image must be a 2-D matrix")
        if not np.all(np.isfinite(px)):
            raise ConfigurationError("gray image contains non-finite pixels")
        if px.min() < 0.0 or px.max() > 255.0:
            raise ConfigurationError("gray pixels must lie in [0, 255]")
        if self.freq_axis_hz is not None:
            ax = np.asarray(self.freq_axis_hz, dtype=np.float64)
            object.__setattr__(self, "freq_axis_hz", ax)
            if len(ax) != px.shape[0]:
                raise DimensionError("frequency axis must match the row count")


@dataclass(frozen=True)
class BinaryImage:
    """Strictly two-valued H x W matrix with entries in {0, 1}."""

    pixels: np.ndarray
    freq_axis_hz: Optional[np.ndarray] = None

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2:
            raise DimensionError("binary image must be a 2-D matrix")
        if not np.isin(px, (0, 1)).all():
            raise ConfigurationError("binary image entries must be 0 or 1")
        object.__setattr__(self, "pixels", px.astype(np.uint8))
        if self.freq_axis_hz is not None:
            ax = np.asarray(self.freq_axis_hz, dtype=np.float64)
            object.__setattr__(self, "freq_axis_hz", ax)
            if len(ax) != px.shape[0]:
                raise DimensionError("frequency axis must match the row count")


@dataclass(frozen=True)
class CompositeImage:
    """Three binary channels (R, G, B) of identical dimensions."""

    r: BinaryImage
    g: BinaryImage
    b: BinaryImage

    def __post_init__(self):
        shape = self.r.pixels.shape
        if self.g.pixels.shape != shape or self.b.pixels.shape != shape:
            raise DimensionError("composite channels must share dimensions")

    @property
    def shape(self) -> tuple:
        return self.r.pixels.shape

    @property
    def side(self) -> int:
        h, w = self.shape
        if h != w:
            raise DimensionError("composite is not square")
        return h

    def stacked(self) -> np.ndarray:
        """(3, H, W) float array in {0.0, 1.0}, channel order R, G, B."""
        return np.stack([self.r.pixels, self.g.pixels, self.b.pixels]).astype(np.float64)


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def normalize(img: GrayImage, a_min: float = 0.0, a_max: float = 137.0) -> GrayImage:
    """Piecewise normalization onto [0, 1]: pixels at or below ``a_min`` map
    to 0, pixels at or above ``a_max`` map to 1, the rest map affinely."""
    if a_min >= a_max:
        raise ConfigurationError("a_min must be strictly below a_max")
    px = img.pixels
    out = (px - a_min) / (a_max - a_min)
    out = np.where(px <= a_min, 0.0, out)
    out = np.where(px >= a_max, 1.0, out)
    return GrayImage(out, freq_axis_hz=img.freq_axis_hz)


def iterate_threshold(pixels: np.ndarray, tol: float = 1e-3,
                      max_iter: int = 100) -> float:
    """Global threshold by mean-of-class-means iteration.

    Starting from T = (max + min) / 2, split the pixels into the part above
    T and the rest, and move T to the midpoint of the two class means until
    the update falls to ``tol``. An empty class contributes mean 0, which
    makes constant images converge to half their value (and binarize to all
    ones under the >= T rule).
    """
    px = np.asarray(pixels, dtype=np.float64).ravel()
    t = 0.5 * (px.max() + px.min())
    for _ in range(max_iter):
        above = px > t
        mu1 = px[above].mean() if above.any() else 0.0
        mu2 = px[~above].mean() if not above.all() else 0.0
        t_new = 0.5 * (mu1 + mu2)
        delta = abs(t_new - t)
        t = t_new
        if delta <= tol:
            return float(t)
    raise ConvergenceError(
        f"threshold iteration did not converge within {max_iter} steps"
    )


def binarize(img: GrayImage, tol: float = 1e-3, max_iter: int = 100) -> BinaryImage:
    """Binarize a normalized image with the iterated global threshold:
    output 1 where pixel >= T, else 0."""
    px = img.pixels
    if px.max() > 1.0:
        raise ConfigurationError("binarize expects a normalized image in [0, 1]")
    t = iterate_threshold(px, tol=tol, max_iter=max_iter)
    return BinaryImage((px >= t).astype(np.uint8), freq_axis_hz=img.freq_axis_hz)


def crop_band(img, band_hz: tuple, margin_frac: float = 0.05):
    """Keep rows whose frequency lies in [low*(1-margin), high*(1+margin)].

    Time extent (columns) is preserved. Works on gray and binary images;
    the frequency axis is cropped along with the rows.
    """
    if img.freq_axis_hz is None:
        raise CropError("image carries no frequency axis to crop by")
    lo, hi = band_hz
    if lo > hi:
        raise ConfigurationError("crop band low bound exceeds high bound")
    axis = img.freq_axis_hz
    keep = (axis >= lo * (1.0 - margin_frac)) & (axis <= hi * (1.0 + margin_frac))
    if not keep.any():
        raise CropError(
            f"band [{lo:g}, {hi:g}] Hz does not intersect the image axis "
            f"[{axis[0]:g}, {axis[-1]:g}] Hz"
        )
    return type(img)(img.pixels[keep, :], freq_axis_hz=axis[keep])


def _nn_indices(n_in: int, n_out: int) -> np.ndarray:
    # round-half-down of i * n_in / n_out
    x = np.arange(n_out) * (n_in / n_out)
    return np.clip(np.ceil(x - 0.5).astype(int), 0, n_in - 1)


def resize_nn(img, side: int):
    """Nearest-neighbor resize to ``side`` x ``side``:

        out[i, j] = in[round_half_down(i*H/side), round_half_down(j*W/side)]

    Binary inputs stay binary; no new pixel values are created."""
    if side < 1:
        raise ConfigurationError("target side must be >= 1")
    h, w = img.pixels.shape
    rows = _nn_indices(h, side)
    cols = _nn_indices(w, side)
    axis = img.freq_axis_hz[rows] if img.freq_axis_hz is not None else None
    return type(img)(img.pixels[np.ix_(rows, cols)], freq_axis_hz=axis)


def compose(r: BinaryImage, g: BinaryImage, b: BinaryImage) -> CompositeImage:
    """Bind three binary channels; convention: wavelet -> R,
    Margenau-Hill -> G, Born-Jordan -> B."""
    return CompositeImage(r, g, b)


def decompose(c: CompositeImage) -> tuple:
    return (c.r, c.g, c.b)


# ---------------------------------------------------------------------------
# PGM (P5) and PPM (P6) files
# ---------------------------------------------------------------------------

def write_pgm(path: str, img: GrayImage) -> None:
    """Binary PGM; pixels in [0, 1] are rescaled to [0, 255], pixels already
    on the [0, 255] scale are written as-is."""
    px = img.pixels
    if px.size and px.max() <= 1.0:
        px = px * 255.0
    data = np.round(px).astype(np.uint8)
    header = f"P5\n{data.shape[1]} {data.shape[0]}\n255\n".encode("ascii")
    atomic_write_bytes(path, header + data.tobytes())


def write_ppm(path: str, comp: CompositeImage) -> None:
    """Binary PPM with one byte per channel, 0 or 255."""
    h, w = comp.shape
    rgb = np.stack([comp.r.pixels, comp.g.pixels, comp.b.pixels], axis=-1)
    data = (rgb.astype(np.uint8) * 255)
    header = f"P6\n{w} {h}\n255\n".encode("ascii")
    atomic_write_bytes(path, header + data.tobytes())


def _read_netpbm(path: str, magic: bytes):
    with open(path, "rb") as f:
        blob = f.read()
    m = re.match(rb"(P[56])\s+(\d+)\s+(\d+)\s+(\d+)\s", blob)
    if m is None or m.group(1) != magic:
        raise ConfigurationError(f"{path} is not a {magic.decode()} file")
    w, h, maxval = (int(m.group(i)) for i in (2, 3, 4))
    if maxval != 255:
        raise ConfigurationError("only 8-bit netpbm files are supported")
    return np.frombuffer(blob[m.end():], dtype=np.uint8), w, h


def read_pgm(path: str) -> GrayImage:
    flat, w, h = _read_netpbm(path, b"P5")
    if flat.size != w * h:
        raise DimensionError(f"{path}: payload does not match header dims")
    return GrayImage(flat.reshape(h, w).astype(np.float64))


def read_ppm(path: str) -> CompositeImage:
    flat, w, h = _read_netpbm(path, b"P6")
    if flat.size != 3 * w * h:
        raise DimensionError(f"{path}: payload does not match header dims")
    rgb = flat.reshape(h, w, 3)
    chans = [BinaryImage((rgb[:, :, i] > 127).astype(np.uint8)) for i in range(3)]
    return CompositeImage(*chans)
