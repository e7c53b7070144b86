"""Gray-level co-occurrence matrices and the four Haralick-style stats.

Pixels are quantized as floor(value * levels / 256); for each of the
four standard offsets (0, 45, 90, 135 degrees at the given distance)
the co-occurrence counts are symmetrized and normalized, the statistic
is computed per offset, and the four values are averaged.

Energy here is the sum of squared matrix entries (the angular second
moment itself, not its square root).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DegenerateImageError, EmptyImageError

# (row shift, col shift) per direction, distance 1 shown; 0 deg points right,
# angles grow counter-clockwise with image rows increasing downward.
OFFSETS = {
    0: (0, 1),
    45: (-1, 1),
    90: (-1, 0),
    135: (-1, -1),
}


def quantize(img: np.ndarray, levels: int) -> np.ndarray:
    """Map 0..255 pixel values onto 0..levels-1 bins."""
    if levels < 2 or levels > 256:
        raise ValueError(f"levels must be in 2..256, got {levels}")
    arr = np.asarray(img)
    if arr.size == 0:
        raise EmptyImageError("image has no pixels")
    return (arr.astype(np.int64) * levels) // 256


def glcm_matrix(quantized: np.ndarray, levels: int, angle: int, distance: int = 1) -> np.ndarray:
    """Symmetric, normalized co-occurrence matrix for one offset."""
    if angle not in OFFSETS:
        raise ValueError(f"angle must be one of {sorted(OFFSETS)}, got {angle}")
    dr, dc = OFFSETS[angle]
    dr, dc = dr * distance, dc * distance
    h, w = quantized.shape

    r0 = max(0, -dr)
    r1 = min(h, h - dr)
    c0 = max(0, -dc)
    c1 = min(w, w - dc)
    if r0 >= r1 or c0 >= c1:
        raise DegenerateImageError(
            f"image {h}x{w} has no pixel pairs at distance {distance}, angle {angle}"
        )
    a = quantized[r0:r1, c0:c1].ravel()
    b = quantized[r0 + dr:r1 + dr, c0 + dc:c1 + dc].ravel()

    counts = np.zeros((levels, levels), dtype=np.float64)
    np.add.at(counts, (a, b), 1.0)
    counts = counts + counts.T
    return counts / counts.sum()


@dataclass(frozen=True)
class GLCMFeatures:
    """Averaged co-occurrence statistics. `correlation` is None when the
    marginal variance vanishes (constant image); the other three stay
    defined (contrast 0, energy 1, homogeneity 1)."""

    contrast: float
    correlation: float | None
    energy: float
    homogeneity: float

    def correlation_or_raise(self) -> float:
        if self.correlation is None:
            raise DegenerateImageError(
                "co-occurrence correlation is undefined for a constant image"
            )
        return self.correlation


def _offset_stats(p: np.ndarray) -> tuple[float, float | None, float, float]:
    levels = p.shape[0]
    i = np.arange(levels, dtype=np.float64)
    diff2 = (i[:, None] - i[None, :]) ** 2
    contrast = float((p * diff2).sum())
    energy = float((p * p).sum())
    homogeneity = float((p / (1.0 + diff2)).sum())

    # marginals are equal for a symmetric matrix
    pi = p.sum(axis=1)
    mu = float((i * pi).sum())
    var = float(((i - mu) ** 2 * pi).sum())
    if var == 0.0:
        correlation = None
    else:
        correlation = float((p * np.outer(i - mu, i - mu)).sum() / var)
    return contrast, correlation, energy, homogeneity


def glcm_features(img: np.ndarray, levels: int = 64, distance: int = 1) -> GLCMFeatures:
    """Contrast / correlation / energy / homogeneity averaged over the
    four offsets. Correlation is None when any offset is degenerate
    (zero marginal variance, e.g. a constant image).
    """
    q = quantize(img, levels)
    contrasts, correlations, energies, homogeneities = [], [], [], []
    for angle in sorted(OFFSETS):
        p = glcm_matrix(q, levels, angle, distance)
        c, r, e, h = _offset_stats(p)
        contrasts.append(c)
        correlations.append(r)
        energies.append(e)
        homogeneities.append(h)
    correlation = None
    if all(r is not None for r in correlations):
        correlation = sum(correlations) / len(correlations)
    return GLCMFeatures(
        contrast=sum(contrasts) / len(contrasts),
        correlation=correlation,
        energy=sum(energies) / len(energies),
        homogeneity=sum(homogeneities) / len(homogeneities),
    )
