"""Grayscale images and the derived fields the contour agents consume.

Conventions used throughout the package:

* intensities are float64 in [0, 1], shape (height, width), row major;
* (x, y) denotes column x and row y, with y growing downward;
* smoothing and gradients replicate edge pixels rather than zero-padding,
  so a constant image stays constant and border gradients stay finite;
* the external energy field is the negated, squared, per-image-normalized
  gradient magnitude of the smoothed image: values lie in [-lam, 0] and the
  strongest edge pixels attain exactly -lam.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate1d

from . import netpbm
from .errors import SizeError

GRADIENT_MAGNITUDE = "gradient_magnitude"
EXTERNAL_ENERGY = "external_energy"

MIN_DIMENSION = 3


def _frozen(array: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(array, dtype=np.float64)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class Image:
    """Immutable grayscale raster with intensities in [0, 1]."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2:
            raise ValueError(f"expected a 2-d array, got shape {px.shape}")
        h, w = px.shape
        if h < MIN_DIMENSION or w < MIN_DIMENSION:
            raise SizeError(f"image {w}x{h} is smaller than {MIN_DIMENSION}x{MIN_DIMENSION}")
        if not np.isfinite(px).all():
            raise ValueError("image contains non-finite values")
        if px.min() < 0.0 or px.max() > 1.0:
            raise ValueError("intensities must lie in [0, 1]")
        object.__setattr__(self, "pixels", _frozen(px))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True, eq=False)
class ScalarField:
    """A per-pixel real field tagged with what it holds.

    kind is GRADIENT_MAGNITUDE (values >= 0) or EXTERNAL_ENERGY (values <= 0).
    """

    values: np.ndarray
    kind: str

    def __post_init__(self):
        vals = np.asarray(self.values)
        if vals.ndim != 2:
            raise ValueError(f"expected a 2-d array, got shape {vals.shape}")
        if self.kind == GRADIENT_MAGNITUDE:
            if vals.size and vals.min() < 0.0:
                raise ValueError("gradient magnitude must be non-negative")
        elif self.kind == EXTERNAL_ENERGY:
            if vals.size and vals.max() > 0.0:
                raise ValueError("external energy must be non-positive")
        else:
            raise ValueError(f"unknown field kind {self.kind!r}")
        object.__setattr__(self, "values", _frozen(vals))

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True, eq=False)
class IntegralImage:
    """Summed-area table: table[y, x] holds the sum of pixels at or above-left of (x, y).

    A zero-padded copy (one extra leading row and column) is kept alongside so
    box sums need no boundary special cases.
    """

    table: np.ndarray

    def __post_init__(self):
        table = np.asarray(self.table, dtype=np.float64)
        if table.ndim != 2:
            raise ValueError(f"expected a 2-d array, got shape {table.shape}")
        h, w = table.shape
        padded = np.zeros((h + 1, w + 1), dtype=np.float64)
        padded[1:, 1:] = table
        object.__setattr__(self, "table", _frozen(table))
        object.__setattr__(self, "padded", _frozen(padded))

    @property
    def width(self) -> int:
        return self.table.shape[1]

    @property
    def height(self) -> int:
        return self.table.shape[0]


@dataclass(frozen=True)
class SmoothingParams:
    """Gaussian pre-smoothing width and external-energy weight."""

    sigma: float = 1.0
    lam: float = 1.0

    def __post_init__(self):
        if self.sigma < 0.0:
            raise ValueError("sigma must be >= 0")
        if self.lam <= 0.0:
            raise ValueError("lam must be > 0")


def load_frame(path) -> Image:
    """Read a PGM/PPM file into a normalized grayscale Image."""
    return Image(netpbm.read(path))


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Normalized 1-d Gaussian taps over radius ceil(3*sigma)."""
    radius = math.ceil(3.0 * sigma)
    taps = np.exp(-(np.arange(-radius, radius + 1, dtype=np.float64) ** 2)
                  / (2.0 * sigma * sigma))
    return taps / taps.sum()


def gaussian_smooth(img: Image, sigma: float) -> Image:
    """Separable Gaussian blur with replicated edges; sigma == 0 is identity."""
    if sigma < 0.0:
        raise ValueError("sigma must be >= 0")
    if sigma == 0.0:
        return img
    kernel = gaussian_kernel(sigma)
    out = correlate1d(img.pixels, kernel, axis=1, mode="nearest")
    out = correlate1d(out, kernel, axis=0, mode="nearest")
    # the kernel sums to 1 only up to rounding; clamp so a smoothed image can
    # never leave the input's value range
    np.clip(out, img.pixels.min(), img.pixels.max(), out=out)
    return Image(out)


def gradient_magnitude(img: Image) -> ScalarField:
    """Central-difference gradient magnitude with replicated edges."""
    p = np.pad(img.pixels, 1, mode="edge")
    gx = (p[1:-1, 2:] - p[1:-1, :-2]) / 2.0
    gy = (p[2:, 1:-1] - p[:-2, 1:-1]) / 2.0
    return ScalarField(np.hypot(gx, gy), GRADIENT_MAGNITUDE)


def external_energy_map(img: Image, params: SmoothingParams) -> ScalarField:
    """Energy field -lam * (m / max m)^2 from the smoothed gradient magnitude m.

    A featureless image (max m == 0) yields an all-zero field.
    """
    m = gradient_magnitude(gaussian_smooth(img, params.sigma)).values
    peak = m.max()
    if peak == 0.0:
        return ScalarField(np.zeros_like(m), EXTERNAL_ENERGY)
    rel = m / peak
    return ScalarField(-params.lam * rel * rel, EXTERNAL_ENERGY)


def integral_image(img: Image) -> IntegralImage:
    """Build the summed-area table of an image."""
    return IntegralImage(img.pixels.cumsum(axis=0).cumsum(axis=1))


def box_sum_grid(padded: np.ndarray, width: int, height: int, x0, y0, x1, y1):
    """Clamped inclusive box sums for arrays of corner coordinates.

    Rectangles are clamped to the image; a rectangle that is empty after
    clamping contributes 0. `padded` is IntegralImage.padded.
    """
    x0c = np.maximum(x0, 0)
    y0c = np.maximum(y0, 0)
    x1c = np.minimum(x1, width - 1)
    y1c = np.minimum(y1, height - 1)
    valid = (x0c <= x1c) & (y0c <= y1c)
    x0i = np.clip(x0c, 0, width - 1)
    y0i = np.clip(y0c, 0, height - 1)
    x1i = np.clip(x1c, -1, width - 1) + 1
    y1i = np.clip(y1c, -1, height - 1) + 1
    total = (padded[y1i, x1i] - padded[y0i, x1i]
             - padded[y1i, x0i] + padded[y0i, x0i])
    return np.where(valid, total, 0.0)


def box_sum(ii: IntegralImage, x0: int, y0: int, x1: int, y1: int) -> float:
    """Sum of pixels over the inclusive rectangle [x0, x1] x [y0, y1].

    The rectangle is clamped to the image bounds; four table lookups total.
    """
    return float(box_sum_grid(ii.padded, ii.width, ii.height,
                              np.asarray(x0), np.asarray(y0),
                              np.asarray(x1), np.asarray(y1)))
