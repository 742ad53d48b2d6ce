"""Pixel- and geometry-level transforms: flip, color jitter, blur, masking.

All operations are pure: they take an image (and parameters / an rng stream)
and return a new image, leaving the input untouched. Box geometry changes only
under the horizontal flip.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
from scipy.ndimage import convolve1d

from .data import BBox, ImageBuffer
from .errors import ParameterError


@dataclass(frozen=True)
class JitterParams:
    brightness_factor: float = 1.0
    contrast_factor: float = 1.0
    saturation_factor: float = 1.0
    hue_shift: float = 0.0  # fraction of the hue circle, in [-0.5, 0.5]

    def __post_init__(self):
        if min(self.brightness_factor, self.contrast_factor, self.saturation_factor) <= 0:
            raise ParameterError("jitter factors must be positive")
        if not -0.5 <= self.hue_shift <= 0.5:
            raise ParameterError("hue_shift must lie in [-0.5, 0.5]")


@dataclass(frozen=True)
class MaskParams:
    pixel_mask_prob: float = 0.75
    block_area_range: Tuple[float, float] = (0.02, 0.33)
    block_aspect_range: Tuple[float, float] = (0.3, 3.3)
    fill_value: int | None = 0  # None means per-image channel mean (block mask)

    def __post_init__(self):
        if not 0.0 <= self.pixel_mask_prob <= 1.0:
            raise ParameterError("pixel_mask_prob must lie in [0, 1]")
        for lo, hi in (self.block_area_range, self.block_aspect_range):
            if not 0 < lo <= hi:
                raise ParameterError("range bounds must satisfy 0 < min <= max")


def hflip(img: ImageBuffer, boxes: Sequence[BBox]) -> Tuple[ImageBuffer, List[BBox]]:
    """Mirror image and boxes about the vertical axis.

    An exact involution on pixels always, and on boxes whenever coordinates
    are dyadic rationals (integers or binary fractions, as annotation data
    in practice is); W - (W - x) can round for arbitrary doubles."""
    flipped = ImageBuffer(img.pixels[:, ::-1].copy())
    w = img.width
    new_boxes = [BBox(w - b.x_max, b.y_min, w - b.x_min, b.y_max) for b in boxes]
    return flipped, new_boxes


_LUMA = np.array([0.299, 0.587, 0.114])


def color_jitter(img: ImageBuffer, params: JitterParams, rng=None) -> ImageBuffer:
    """Brightness/contrast/saturation as multiplicative blends, hue as a
    rotation in HSV space. Identity parameters reproduce the input exactly."""
    x = img.pixels.astype(np.float64)

    if params.brightness_factor != 1.0:
        x = x * params.brightness_factor
    if params.contrast_factor != 1.0:
        mean = (img.pixels.astype(np.float64) @ _LUMA).mean()
        x = (x - mean) * params.contrast_factor + mean
    if params.saturation_factor != 1.0:
        luma = (x @ _LUMA)[..., None]
        x = (x - luma) * params.saturation_factor + luma
    x = np.clip(x, 0.0, 255.0)

    if params.hue_shift != 0.0:
        x = _shift_hue(x, params.hue_shift)

    return ImageBuffer(np.clip(np.round(x), 0, 255).astype(np.uint8))


def _shift_hue(x: np.ndarray, shift: float) -> np.ndarray:
    """Vectorized RGB -> HSV hue rotation -> RGB on float pixels in [0, 255]."""
    r, g, b = x[..., 0] / 255.0, x[..., 1] / 255.0, x[..., 2] / 255.0
    maxc = np.maximum(np.maximum(r, g), b)
    minc = np.minimum(np.minimum(r, g), b)
    v = maxc
    delta = maxc - minc
    s = np.where(maxc > 0, delta / np.where(maxc > 0, maxc, 1), 0.0)

    safe = np.where(delta > 0, delta, 1)
    rc = (maxc - r) / safe
    gc = (maxc - g) / safe
    bc = (maxc - b) / safe
    h = np.where(maxc == r, bc - gc, np.where(maxc == g, 2.0 + rc - bc, 4.0 + gc - rc))
    h = np.where(delta > 0, (h / 6.0) % 1.0, 0.0)

    h = (h + shift) % 1.0

    i = np.floor(h * 6.0)
    f = h * 6.0 - i
    p = v * (1.0 - s)
    q = v * (1.0 - s * f)
    t = v * (1.0 - s * (1.0 - f))
    i = i.astype(int) % 6
    r2 = np.choose(i, [v, q, p, p, t, v])
    g2 = np.choose(i, [t, v, v, q, p, p])
    b2 = np.choose(i, [p, p, t, v, v, q])
    return np.stack([r2, g2, b2], axis=-1) * 255.0


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Normalized 1-D Gaussian with radius ceil(3 * sigma)."""
    radius = math.ceil(3 * sigma)
    xs = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(xs**2) / (2.0 * sigma**2))
    return k / k.sum()


def gaussian_blur(img: ImageBuffer, sigma: float) -> ImageBuffer:
    """Separable Gaussian convolution, clamp-to-edge borders; sigma=0 is identity."""
    if sigma < 0:
        raise ParameterError("sigma must be non-negative")
    if sigma == 0:
        return ImageBuffer(img.pixels.copy())
    k = gaussian_kernel(sigma)
    x = img.pixels.astype(np.float64)
    x = convolve1d(x, k, axis=0, mode="nearest")
    x = convolve1d(x, k, axis=1, mode="nearest")
    return ImageBuffer(np.clip(np.round(x), 0, 255).astype(np.uint8))


def pixel_mask(img: ImageBuffer, p: float, fill: int, rng: np.random.Generator) -> ImageBuffer:
    """Independently blank each pixel to (fill, fill, fill) with probability p."""
    if not 0.0 <= p <= 1.0:
        raise ParameterError("p must lie in [0, 1]")
    out = img.pixels.copy()
    mask = rng.random((img.height, img.width)) < p
    out[mask] = fill
    return ImageBuffer(out)


def block_mask(img: ImageBuffer, params: MaskParams, rng: np.random.Generator) -> ImageBuffer:
    """Erase one random rectangle (area fraction uniform, aspect log-uniform,
    position uniform, fully inside the image). Gives up after 10 draws."""
    h_img, w_img = img.height, img.width
    area_lo, area_hi = params.block_area_range
    asp_lo, asp_hi = params.block_aspect_range
    for _ in range(10):
        frac = rng.uniform(area_lo, area_hi)
        aspect = math.exp(rng.uniform(math.log(asp_lo), math.log(asp_hi)))
        area_px = frac * w_img * h_img
        w = int(round(math.sqrt(area_px * aspect)))
        h = int(round(math.sqrt(area_px / aspect)))
        if w < 1 or h < 1 or w > w_img or h > h_img:
            continue
        x0 = int(rng.integers(0, w_img - w + 1))
        y0 = int(rng.integers(0, h_img - h + 1))
        fill = channel_mean_fill(img) if params.fill_value is None else params.fill_value
        out = img.pixels.copy()
        out[y0 : y0 + h, x0 : x0 + w] = fill
        return ImageBuffer(out)
    return ImageBuffer(img.pixels.copy())


def channel_mean_fill(img: ImageBuffer) -> int:
    """Default block-mask fill: rounded mean over all samples."""
    return int(round(float(img.pixels.mean())))
