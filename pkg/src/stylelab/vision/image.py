"""Grayscale conversion, circular masking, brightness."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from ..errors import CenterOutsideImageError, DegenerateImageError, EmptyImageError


def to_grayscale(rgb: np.ndarray) -> np.ndarray:
    """Luma-weighted grayscale with half-up rounding.

    y = floor(0.299 R + 0.587 G + 0.114 B + 0.5), so pure red maps to 76.
    A 2-d input is returned unchanged (already gray); an alpha channel is
    ignored.
    """
    arr = np.asarray(rgb)
    if arr.size == 0:
        raise EmptyImageError("image has no pixels")
    if arr.ndim == 2:
        return arr.astype(np.uint8)
    if arr.ndim != 3 or arr.shape[2] < 3:
        raise EmptyImageError(f"expected HxW or HxWx3+ array, got shape {arr.shape}")
    rgb_f = arr[:, :, :3].astype(np.float64)
    y = 0.299 * rgb_f[:, :, 0] + 0.587 * rgb_f[:, :, 1] + 0.114 * rgb_f[:, :, 2]
    return np.floor(y + 0.5).astype(np.uint8)


def load_gray(path: str | Path) -> np.ndarray:
    """Load an image file as a uint8 grayscale array."""
    with Image.open(path) as im:
        mode = im.mode
        if mode in ("L", "I;16", "I"):
            arr = np.asarray(im.convert("L"))
            if arr.size == 0:
                raise EmptyImageError(f"{path} has no pixels")
            return arr.astype(np.uint8)
        arr = np.asarray(im.convert("RGB"))
    return to_grayscale(arr)


def circular_mask(
    shape: tuple[int, int],
    center: tuple[float, float] | None = None,
    radius: float | None = None,
) -> np.ndarray:
    """Boolean mask of the disc inside `shape` ((row, col) center)."""
    h, w = shape
    if h == 0 or w == 0:
        raise EmptyImageError("image has no pixels")
    if center is None:
        center = ((h - 1) / 2.0, (w - 1) / 2.0)
    cy, cx = center
    if not (0 <= cy <= h - 1 and 0 <= cx <= w - 1):
        raise CenterOutsideImageError(f"center {center} outside {h}x{w} image")
    if radius is None:
        radius = min(h, w) / 2.0
    if radius <= 0:
        raise DegenerateImageError(f"radius must be positive, got {radius}")
    rows = np.arange(h)[:, None] - cy
    cols = np.arange(w)[None, :] - cx
    return rows * rows + cols * cols <= radius * radius


def apply_circular_mask(
    img: np.ndarray,
    center: tuple[float, float] | None = None,
    radius: float | None = None,
    fill: int = 0,
) -> np.ndarray:
    """Copy of `img` with everything outside the disc set to `fill`."""
    mask = circular_mask(img.shape[:2], center, radius)
    out = img.copy()
    out[~mask] = fill
    return out


def mean_brightness(img: np.ndarray, mask: np.ndarray | None = None) -> float:
    """Mean pixel value scaled to [0, 1]: (sum of pixels / 255) / count.

    All-black gives 0.0, all-white 1.0. An optional boolean mask restricts
    the average to the selected pixels.
    """
    arr = np.asarray(img, dtype=np.float64)
    if arr.size == 0:
        raise EmptyImageError("image has no pixels")
    if mask is not None:
        if mask.shape != arr.shape:
            raise DegenerateImageError(f"mask shape {mask.shape} != image shape {arr.shape}")
        if not mask.any():
            raise DegenerateImageError("mask selects no pixels")
        arr = arr[mask]
    return float(arr.mean() / 255.0)
