"""Difference-of-Gaussians keypoint detection (detection only).

A scale-space pyramid is built per octave from sigma = 1.6 with three
intervals, each octave downsampled 2x from the k=2*sigma image of the
previous one. Candidates are strict extrema over their 26 scale-space
neighbors, then filtered by DoG contrast and by the Hessian trace/det
edge ratio. No orientation assignment or descriptors: the downstream
feature is the keypoint count, a proxy for visual busyness.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from ..errors import EmptyImageError, ImageTooSmallError

MIN_SIDE = 32
MIN_OCTAVE_SIDE = 16


@dataclass(frozen=True)
class Keypoint:
    row: float
    col: float
    octave: int
    layer: int
    sigma: float
    response: float


def _octave_extrema(
    dog: np.ndarray,
    octave: int,
    sigmas: list[float],
    contrast_threshold: float,
    edge_ratio: float,
) -> list[Keypoint]:
    n_layers, h, w = dog.shape
    scale = 2 ** octave
    edge_bound = (edge_ratio + 1.0) ** 2 / edge_ratio
    found = []
    for layer in range(1, n_layers - 1):
        stack = dog[layer - 1:layer + 2]
        center = dog[layer]
        strong = np.abs(center) >= contrast_threshold
        strong[:1, :] = strong[-1:, :] = False
        strong[:, :1] = strong[:, -1:] = False
        for r, c in zip(*np.nonzero(strong)):
            v = center[r, c]
            cube = stack[:, r - 1:r + 2, c - 1:c + 2]
            if v > 0:
                if not (v > cube).sum() == 26:
                    continue
            elif not (v < cube).sum() == 26:
                continue

            dxx = center[r, c + 1] + center[r, c - 1] - 2.0 * v
            dyy = center[r + 1, c] + center[r - 1, c] - 2.0 * v
            dxy = 0.25 * (
                center[r + 1, c + 1] - center[r + 1, c - 1]
                - center[r - 1, c + 1] + center[r - 1, c - 1]
            )
            tr = dxx + dyy
            det = dxx * dyy - dxy * dxy
            if det <= 0 or tr * tr / det >= edge_bound:
                continue
            found.append(Keypoint(
                row=float(r * scale),
                col=float(c * scale),
                octave=octave,
                layer=layer,
                sigma=sigmas[layer] * scale,
                response=float(v),
            ))
    return found


def detect_keypoints(
    img: np.ndarray,
    base_sigma: float = 1.6,
    n_intervals: int = 3,
    contrast_threshold: float = 0.03,
    edge_ratio: float = 10.0,
) -> list[Keypoint]:
    """DoG extrema of a uint8 (or float 0..255) image, base-image coords."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.size == 0:
        raise EmptyImageError("image has no pixels")
    if min(arr.shape) < MIN_SIDE:
        raise ImageTooSmallError(
            f"keypoint detection needs at least {MIN_SIDE}px per side, got {arr.shape}"
        )
    base = arr / 255.0

    sigmas = [base_sigma * 2.0 ** (i / n_intervals) for i in range(n_intervals + 3)]
    keypoints: list[Keypoint] = []
    octave_img = base
    octave = 0
    while min(octave_img.shape) >= MIN_OCTAVE_SIDE:
        gaussians = np.stack([gaussian_filter(octave_img, s, mode="nearest") for s in sigmas])
        dog = gaussians[1:] - gaussians[:-1]
        keypoints.extend(
            _octave_extrema(dog, octave, sigmas, contrast_threshold, edge_ratio)
        )
        # the n_intervals-th image sits one full doubling up; its downsample
        # seeds the next octave at the same base blur
        octave_img = gaussians[n_intervals][::2, ::2]
        octave += 1
    return keypoints


def keypoint_count(img: np.ndarray, **kwargs) -> int:
    return len(detect_keypoints(img, **kwargs))
