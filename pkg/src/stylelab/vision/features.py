"""One-stop extraction of the per-image feature vector.

Columns (CSV order): value, keypoints, tamura.coarseness, tamura.contrast,
tamura.directionality, glcm.contrast, glcm.correlation, glcm.energy,
glcm.homogeneity, angles. `angles` counts dominant line orientations;
`glcm.correlation` can be missing (degenerate image) and serializes as
an empty cell.
"""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import ImageTooSmallError
from .glcm import glcm_features
from .image import apply_circular_mask, circular_mask, load_gray, mean_brightness
from .keypoints import detect_keypoints
from .lines import canny, dominant_orientation_count, probabilistic_hough
from .tamura import MIN_SIDE, coarseness, contrast, directionality

FEATURE_COLUMNS = (
    "value",
    "keypoints",
    "tamura.coarseness",
    "tamura.contrast",
    "tamura.directionality",
    "glcm.contrast",
    "glcm.correlation",
    "glcm.energy",
    "glcm.homogeneity",
    "angles",
)


@dataclass(frozen=True)
class CvConfig:
    glcm_levels: int = 64
    glcm_distance: int = 1
    canny_sigma: float = 1.4
    canny_low: float = 50.0
    canny_high: float = 150.0
    hough_threshold: int = 30
    hough_max_gap: int = 4
    hough_min_length: float | None = None
    dog_base_sigma: float = 1.6
    dog_intervals: int = 3
    dog_contrast_threshold: float = 0.03
    dog_edge_ratio: float = 10.0
    orientation_bin_width: float = 2.0
    orientation_min_count: int = 2
    # restrict `value` to the inscribed disc (product region) instead of
    # the full frame; texture features always see the full frame
    circular_value_mask: bool = False


@dataclass(frozen=True)
class CvFeatureVector:
    value: float
    keypoints: int
    tamura_coarseness: float
    tamura_contrast: float
    tamura_directionality: float
    glcm_contrast: float
    glcm_correlation: float | None
    glcm_energy: float
    glcm_homogeneity: float
    angles: int

    def as_row(self) -> dict[str, float | int | None]:
        return {
            "value": self.value,
            "keypoints": self.keypoints,
            "tamura.coarseness": self.tamura_coarseness,
            "tamura.contrast": self.tamura_contrast,
            "tamura.directionality": self.tamura_directionality,
            "glcm.contrast": self.glcm_contrast,
            "glcm.correlation": self.glcm_correlation,
            "glcm.energy": self.glcm_energy,
            "glcm.homogeneity": self.glcm_homogeneity,
            "angles": self.angles,
        }


def derive_image_seed(seed: int, stimulus_id: str) -> int:
    """Per-image sub-seed so extraction order cannot change results."""
    digest = hashlib.sha256(f"{seed}:{stimulus_id}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def extract_cv_features(img, config: CvConfig = CvConfig(), seed: int = 0) -> CvFeatureVector:
    """Extract the full visual feature vector from a grayscale image."""
    import numpy as np

    arr = np.asarray(img)
    if min(arr.shape[:2]) < MIN_SIDE:
        raise ImageTooSmallError(
            f"feature extraction needs at least {MIN_SIDE}px per side, got {arr.shape}"
        )

    if config.circular_value_mask:
        value = mean_brightness(arr, circular_mask(arr.shape[:2]))
    else:
        value = mean_brightness(arr)

    glcm = glcm_features(arr, levels=config.glcm_levels, distance=config.glcm_distance)
    n_keypoints = len(detect_keypoints(
        arr,
        base_sigma=config.dog_base_sigma,
        n_intervals=config.dog_intervals,
        contrast_threshold=config.dog_contrast_threshold,
        edge_ratio=config.dog_edge_ratio,
    ))
    edges = canny(arr, sigma=config.canny_sigma, low=config.canny_low, high=config.canny_high)
    segments = probabilistic_hough(
        edges,
        seed=seed,
        threshold=config.hough_threshold,
        min_length=config.hough_min_length,
        max_gap=config.hough_max_gap,
    )
    angles = dominant_orientation_count(
        segments, bin_width=config.orientation_bin_width, min_count=config.orientation_min_count
    )
    return CvFeatureVector(
        value=value,
        keypoints=n_keypoints,
        tamura_coarseness=coarseness(arr),
        tamura_contrast=contrast(arr),
        tamura_directionality=directionality(arr),
        glcm_contrast=glcm.contrast,
        glcm_correlation=glcm.correlation,
        glcm_energy=glcm.energy,
        glcm_homogeneity=glcm.homogeneity,
        angles=angles,
    )


def extract_features_for_images(
    image_paths: dict[str, str | Path],
    config: CvConfig = CvConfig(),
    seed: int = 0,
) -> dict[str, CvFeatureVector]:
    """Extract features for many images; each gets an id-derived sub-seed."""
    out: dict[str, CvFeatureVector] = {}
    for sid in sorted(image_paths):
        img = load_gray(image_paths[sid])
        out[sid] = extract_cv_features(img, config, seed=derive_image_seed(seed, sid))
    return out


def write_features_csv(path: str | Path, features: dict[str, CvFeatureVector]) -> None:
    """Write id-keyed feature vectors; floats use repr for exact round-trip."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(("id",) + FEATURE_COLUMNS)
        for sid in sorted(features):
            row = features[sid].as_row()
            cells = [sid]
            for col in FEATURE_COLUMNS:
                v = row[col]
                if v is None:
                    cells.append("")
                elif isinstance(v, int):
                    cells.append(str(v))
                else:
                    cells.append(repr(float(v)))
            writer.writerow(cells)


def read_features_csv(path: str | Path) -> dict[str, dict[str, float | None]]:
    """Inverse of `write_features_csv` keeping floats exact."""
    out: dict[str, dict[str, float | None]] = {}
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            parsed: dict[str, float | None] = {}
            for col in FEATURE_COLUMNS:
                raw = row[col]
                parsed[col] = None if raw == "" else float(raw)
            out[row["id"]] = parsed
    return out
