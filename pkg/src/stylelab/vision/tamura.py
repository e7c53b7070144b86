"""Tamura texture features: coarseness, contrast, directionality.

Coarseness picks, per pixel, the window scale 2^k (k = 1..5) whose
shifted-average difference is largest, and averages those scales.
Contrast is sigma / kurtosis^(1/4). Directionality builds a 16-bin
histogram of Prewitt gradient orientations over [0, pi) and scores how
tightly the mass concentrates around its peaks.
"""

from __future__ import annotations

import numpy as np

from ..errors import EmptyImageError, ImageTooSmallError

MIN_SIDE = 32
COARSENESS_MAX_K = 5
DIRECTIONALITY_BINS = 16
DIRECTIONALITY_THRESHOLD = 12.0


def _window_means(img: np.ndarray, half: int) -> np.ndarray:
    """Mean over a (2*half) square window centred on each pixel.

    The window spans [r-half, r+half-1] x [c-half, c+half-1]; pixels
    beyond the border are mirrored. Reflection keeps periodic textures
    periodic across the border, so fine patterns are not mistaken for
    large flat regions near the corners.
    """
    padded = np.pad(img, ((half, half - 1), (half, half - 1)), mode="reflect")
    integral = np.zeros((padded.shape[0] + 1, padded.shape[1] + 1))
    integral[1:, 1:] = np.cumsum(np.cumsum(padded, axis=0), axis=1)
    size = 2 * half
    h, w = img.shape
    total = (
        integral[size:size + h, size:size + w]
        - integral[:h, size:size + w]
        - integral[size:size + h, :w]
        + integral[:h, :w]
    )
    return total / (size * size)


def _shift(arr: np.ndarray, dr: int, dc: int) -> np.ndarray:
    """Shift with edge clamping: out[r, c] = arr[clip(r+dr), clip(c+dc)]."""
    h, w = arr.shape
    rows = np.clip(np.arange(h) + dr, 0, h - 1)
    cols = np.clip(np.arange(w) + dc, 0, w - 1)
    return arr[rows][:, cols]


def coarseness(img: np.ndarray, max_k: int = COARSENESS_MAX_K) -> float:
    """Mean over pixels of the best window size 2^k (smaller k wins ties)."""
    arr = np.asarray(img, dtype=np.float64)
    _require_size(arr)
    best_e = np.full(arr.shape, -1.0)
    best_size = np.zeros(arr.shape)
    for k in range(1, max_k + 1):
        half = 2 ** (k - 1)
        means = _window_means(arr, half)
        e_h = np.abs(_shift(means, 0, half) - _shift(means, 0, -half))
        e_v = np.abs(_shift(means, half, 0) - _shift(means, -half, 0))
        e_k = np.maximum(e_h, e_v)
        better = e_k > best_e
        best_e[better] = e_k[better]
        best_size[better] = 2 ** k
    return float(best_size.mean())


def contrast(img: np.ndarray) -> float:
    """sigma / kurtosis^(1/4); 0 for a constant image."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.size == 0:
        raise EmptyImageError("image has no pixels")
    mu = arr.mean()
    var = ((arr - mu) ** 2).mean()
    if var == 0.0:
        return 0.0
    mu4 = ((arr - mu) ** 4).mean()
    alpha4 = mu4 / (var * var)
    return float(np.sqrt(var) / alpha4 ** 0.25)


def _prewitt_gradients(arr: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    padded = np.pad(arr, 1, mode="edge")

    def win(dr, dc):
        return padded[1 + dr:1 + dr + arr.shape[0], 1 + dc:1 + dc + arr.shape[1]]

    dh = (
        win(-1, 1) + win(0, 1) + win(1, 1)
        - win(-1, -1) - win(0, -1) - win(1, -1)
    )
    dv = (
        win(1, -1) + win(1, 0) + win(1, 1)
        - win(-1, -1) - win(-1, 0) - win(-1, 1)
    )
    return dh, dv


def directionality_histogram(
    img: np.ndarray,
    n_bins: int = DIRECTIONALITY_BINS,
    threshold: float = DIRECTIONALITY_THRESHOLD,
) -> np.ndarray:
    """Normalized histogram of gradient orientations over [0, pi).

    Only pixels whose mean absolute gradient (|dH| + |dV|) / 2 passes the
    threshold contribute. Returns the zero histogram when nothing does.
    """
    arr = np.asarray(img, dtype=np.float64)
    _require_size(arr)
    dh, dv = _prewitt_gradients(arr)
    magnitude = (np.abs(dh) + np.abs(dv)) / 2.0
    keep = magnitude >= threshold
    if not keep.any():
        return np.zeros(n_bins)
    theta = np.mod(np.arctan2(dv[keep], dh[keep]), np.pi)
    bins = np.minimum((theta / np.pi * n_bins).astype(int), n_bins - 1)
    hist = np.bincount(bins, minlength=n_bins).astype(np.float64)
    return hist / hist.sum()


def _circular_peaks(hist: np.ndarray) -> list[int]:
    n = len(hist)
    peaks = [
        p for p in range(n)
        if hist[p] > hist[(p - 1) % n] and hist[p] > hist[(p + 1) % n]
    ]
    if not peaks:
        peaks = [int(np.argmax(hist))]
    return peaks


def directionality(
    img: np.ndarray,
    n_bins: int = DIRECTIONALITY_BINS,
    threshold: float = DIRECTIONALITY_THRESHOLD,
) -> float:
    """1 - n_peaks * sum over peak windows of (phi - phi_peak)^2 H(phi).

    Peak windows are delimited by the histogram valleys between circularly
    adjacent peaks; angular distances wrap at pi. Clamped to [0, 1], and 0
    when no pixel passes the gradient threshold.
    """
    hist = directionality_histogram(img, n_bins, threshold)
    if hist.sum() == 0.0:
        return 0.0
    peaks = _circular_peaks(hist)
    n = len(hist)

    if len(peaks) == 1:
        windows = [(peaks[0], list(range(n)))]
    else:
        # the valley after each peak bounds its window on the right
        valleys = []
        for idx, p in enumerate(peaks):
            nxt = peaks[(idx + 1) % len(peaks)]
            span = (nxt - p) % n
            between = [(p + off) % n for off in range(1, span)]
            valleys.append(min(between, key=lambda b: (hist[b], b)) if between else p)
        windows = []
        for idx, p in enumerate(peaks):
            left_valley = valleys[(idx - 1) % len(peaks)]
            right_valley = valleys[idx]
            span = (right_valley - left_valley) % n
            members = [(left_valley + off) % n for off in range(1, span + 1)]
            windows.append((p, members))

    centers = (np.arange(n) + 0.5) * np.pi / n
    spread = 0.0
    for peak, members in windows:
        for b in members:
            d = centers[b] - centers[peak]
            d = (d + np.pi / 2.0) % np.pi - np.pi / 2.0
            spread += d * d * hist[b]
    value = 1.0 - len(peaks) * spread
    return float(min(1.0, max(0.0, value)))


def _require_size(arr: np.ndarray) -> None:
    if arr.size == 0:
        raise EmptyImageError("image has no pixels")
    if min(arr.shape[:2]) < MIN_SIDE:
        raise ImageTooSmallError(
            f"texture features need images of at least {MIN_SIDE}px per side, got {arr.shape}"
        )
