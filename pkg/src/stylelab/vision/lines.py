"""Canny edges and a seeded probabilistic Hough transform.

The Hough stage is written here rather than taken from a library because
the pipeline contract requires that the same image and seed reproduce
the identical segment list, which needs control over the sampling order.
The algorithm follows the standard progressive probabilistic scheme:
visit edge points in a seeded random order, vote a point into the
(theta, rho) accumulator, and when its best bin reaches the threshold,
walk the corresponding line in both directions bridging small gaps. A
long enough walk is emitted as a segment and its pixels are consumed
(their earlier votes are removed); otherwise nothing is consumed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter, label

from ..errors import EmptyImageError

SOBEL_X = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.float64)
SOBEL_Y = np.array([[-1, -2, -1], [0, 0, 0], [1, 2, 1]], dtype=np.float64)

# a single gray-level step yields a raw Sobel response around 0.5 even
# after heavy blur; peaks below this are round-off, not structure
FLAT_GRADIENT_PEAK = 1e-6


def _convolve3(arr: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    padded = np.pad(arr, 1, mode="edge")
    out = np.zeros_like(arr)
    for dr in range(3):
        for dc in range(3):
            out += kernel[dr, dc] * padded[dr:dr + arr.shape[0], dc:dc + arr.shape[1]]
    return out


def gradient_magnitude(img: np.ndarray, sigma: float = 1.4) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Blurred Sobel gradients with the magnitude rescaled to 8-bit range.

    The magnitude map is normalized by its own maximum to [0, 255], so the
    strongest edge in any non-flat image reads as 255 and the hysteresis
    thresholds act relative to it. Without this the sigma=1.4 blur caps a
    hard 0-to-255 step's raw response below the default high threshold and
    nothing would ever be detected.
    """
    arr = np.asarray(img, dtype=np.float64)
    if arr.size == 0:
        raise EmptyImageError("image has no pixels")
    smoothed = gaussian_filter(arr, sigma, mode="nearest")
    gx = _convolve3(smoothed, SOBEL_X)
    gy = _convolve3(smoothed, SOBEL_Y)
    mag = np.hypot(gx, gy)
    peak = mag.max()
    # a flat image leaves only float round-off (~1e-13) in the gradients;
    # rescaling that to 255 would invent edges out of nothing
    if peak > FLAT_GRADIENT_PEAK:
        mag = mag * (255.0 / peak)
    else:
        mag = np.zeros_like(mag)
    return mag, gx, gy


def _non_maximum_suppression(mag: np.ndarray, gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
    angle = np.mod(np.degrees(np.arctan2(gy, gx)), 180.0)
    padded = np.pad(mag, 1, mode="constant")

    def nb(dr, dc):
        return padded[1 + dr:1 + dr + mag.shape[0], 1 + dc:1 + dc + mag.shape[1]]

    sector0 = (angle < 22.5) | (angle >= 157.5)
    sector45 = (angle >= 22.5) & (angle < 67.5)
    sector90 = (angle >= 67.5) & (angle < 112.5)
    sector135 = (angle >= 112.5) & (angle < 157.5)

    keep = np.zeros(mag.shape, dtype=bool)
    keep |= sector0 & (mag >= nb(0, 1)) & (mag >= nb(0, -1))
    keep |= sector45 & (mag >= nb(1, 1)) & (mag >= nb(-1, -1))
    keep |= sector90 & (mag >= nb(1, 0)) & (mag >= nb(-1, 0))
    keep |= sector135 & (mag >= nb(1, -1)) & (mag >= nb(-1, 1))
    return np.where(keep, mag, 0.0)


def canny(
    img: np.ndarray,
    sigma: float = 1.4,
    low: float = 50.0,
    high: float = 150.0,
) -> np.ndarray:
    """Boolean edge map: blur, Sobel, 4-sector NMS, hysteresis.

    Hysteresis keeps every >= low pixel whose 8-connected component
    contains at least one >= high pixel.
    """
    if low > high:
        raise ValueError(f"low threshold {low} exceeds high threshold {high}")
    mag, gx, gy = gradient_magnitude(img, sigma)
    thinned = _non_maximum_suppression(mag, gx, gy)
    weak = thinned >= low
    if not weak.any():
        return weak
    labels, n_components = label(weak, structure=np.ones((3, 3), dtype=int))
    strong_labels = np.unique(labels[thinned >= high])
    strong_labels = strong_labels[strong_labels != 0]
    return np.isin(labels, strong_labels)


@dataclass(frozen=True)
class LineSegment:
    x1: int
    y1: int
    x2: int
    y2: int

    @property
    def length(self) -> float:
        return math.hypot(self.x2 - self.x1, self.y2 - self.y1)

    @property
    def angle_deg(self) -> float:
        """Orientation in [0, 180): degrees(atan2(dy, dx)) mod 180."""
        return math.degrees(math.atan2(self.y2 - self.y1, self.x2 - self.x1)) % 180.0


def _walk(
    edge_alive: np.ndarray,
    x0: int,
    y0: int,
    dx: float,
    dy: float,
    max_gap: int,
) -> tuple[int, int, list[tuple[int, int]]]:
    """Follow the line direction from (x0, y0), bridging gaps <= max_gap.

    Returns the last on-edge pixel reached and every on-edge pixel seen.
    """
    h, w = edge_alive.shape
    visited = []
    last = (x0, y0)
    if abs(dx) >= abs(dy):
        step_x = 1 if dx > 0 else -1
        slope = dy / dx if dx != 0 else 0.0
        gap = 0
        k = 1
        while True:
            x = x0 + step_x * k
            y = int(round(y0 + step_x * k * slope))
            if not (0 <= x < w and 0 <= y < h):
                break
            if edge_alive[y, x]:
                visited.append((x, y))
                last = (x, y)
                gap = 0
            else:
                gap += 1
                if gap > max_gap:
                    break
            k += 1
    else:
        step_y = 1 if dy > 0 else -1
        slope = dx / dy if dy != 0 else 0.0
        gap = 0
        k = 1
        while True:
            y = y0 + step_y * k
            x = int(round(x0 + step_y * k * slope))
            if not (0 <= x < w and 0 <= y < h):
                break
            if edge_alive[y, x]:
                visited.append((x, y))
                last = (x, y)
                gap = 0
            else:
                gap += 1
                if gap > max_gap:
                    break
            k += 1
    return last[0], last[1], visited


def probabilistic_hough(
    edges: np.ndarray,
    seed: int = 0,
    threshold: int = 30,
    min_length: float | None = None,
    max_gap: int = 4,
) -> list[LineSegment]:
    """Seeded progressive probabilistic Hough line detection.

    `min_length` defaults to 10% of the smaller image side. The output is
    a deterministic function of (edges, seed, parameters).
    """
    edges = np.asarray(edges, dtype=bool)
    h, w = edges.shape
    if min_length is None:
        min_length = 0.1 * min(h, w)

    n_theta = 180
    thetas = np.deg2rad(np.arange(n_theta, dtype=np.float64))
    cos_t, sin_t = np.cos(thetas), np.sin(thetas)
    rho_max = int(math.ceil(math.hypot(h, w)))
    n_rho = 2 * rho_max + 1
    acc = np.zeros((n_theta, n_rho), dtype=np.int32)

    alive = edges.copy()
    voted = np.zeros_like(alive)
    ys, xs = np.nonzero(edges)
    points = np.column_stack([xs, ys])
    rng = np.random.default_rng(seed)
    order = rng.permutation(points.shape[0])

    def rho_bins(x: int, y: int) -> np.ndarray:
        return np.rint(x * cos_t + y * sin_t).astype(np.int64) + rho_max

    segments: list[LineSegment] = []
    for idx in order:
        x, y = int(points[idx, 0]), int(points[idx, 1])
        if not alive[y, x]:
            continue
        bins = rho_bins(x, y)
        acc[np.arange(n_theta), bins] += 1
        voted[y, x] = True

        votes = acc[np.arange(n_theta), bins]
        best_theta = int(np.argmax(votes))
        if votes[best_theta] < threshold:
            continue

        # direction of the line whose normal is best_theta
        dx, dy = -sin_t[best_theta], cos_t[best_theta]
        fx, fy, forward = _walk(alive, x, y, dx, dy, max_gap)
        bx, by, backward = _walk(alive, x, y, -dx, -dy, max_gap)
        if math.hypot(fx - bx, fy - by) < min_length:
            continue

        consumed = [(x, y)] + forward + backward
        for px, py in consumed:
            if not alive[py, px]:
                continue
            alive[py, px] = False
            if voted[py, px]:
                pbins = rho_bins(px, py)
                acc[np.arange(n_theta), pbins] -= 1
                voted[py, px] = False
        segments.append(LineSegment(x1=bx, y1=by, x2=fx, y2=fy))
    return segments


def detect_line_segments(
    img: np.ndarray,
    seed: int = 0,
    sigma: float = 1.4,
    low: float = 50.0,
    high: float = 150.0,
    threshold: int = 30,
    min_length: float | None = None,
    max_gap: int = 4,
) -> list[LineSegment]:
    """Canny edges followed by the seeded Hough stage, in one call."""
    edges = canny(img, sigma=sigma, low=low, high=high)
    return probabilistic_hough(
        edges, seed=seed, threshold=threshold, min_length=min_length, max_gap=max_gap
    )


def orientation_histogram(
    segments: list[LineSegment], bin_width: float = 2.0
) -> np.ndarray:
    """Counts of segment orientations over [0, 180) in bin_width buckets."""
    n_bins = int(round(180.0 / bin_width))
    hist = np.zeros(n_bins, dtype=int)
    for seg in segments:
        hist[min(int(seg.angle_deg / bin_width), n_bins - 1)] += 1
    return hist


def dominant_orientation_count(
    segments: list[LineSegment], bin_width: float = 2.0, min_count: int = 2
) -> int:
    """Number of orientation bins holding at least `min_count` segments."""
    hist = orientation_histogram(segments, bin_width)
    return int((hist >= min_count).sum())
