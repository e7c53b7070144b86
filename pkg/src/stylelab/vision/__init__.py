"""Low-level visual feature extraction for product images."""

from .features import (
    CvConfig,
    CvFeatureVector,
    FEATURE_COLUMNS,
    extract_cv_features,
    extract_features_for_images,
    read_features_csv,
    write_features_csv,
)
from .glcm import GLCMFeatures, glcm_features, glcm_matrix, quantize
from .image import apply_circular_mask, load_gray, mean_brightness, to_grayscale
from .keypoints import Keypoint, detect_keypoints, keypoint_count
from .lines import (
    LineSegment,
    canny,
    detect_line_segments,
    dominant_orientation_count,
    orientation_histogram,
    probabilistic_hough,
)
from .tamura import coarseness, contrast, directionality, directionality_histogram

__all__ = [
    "CvConfig",
    "CvFeatureVector",
    "FEATURE_COLUMNS",
    "GLCMFeatures",
    "Keypoint",
    "LineSegment",
    "apply_circular_mask",
    "canny",
    "coarseness",
    "contrast",
    "detect_keypoints",
    "detect_line_segments",
    "directionality",
    "directionality_histogram",
    "dominant_orientation_count",
    "extract_cv_features",
    "extract_features_for_images",
    "glcm_features",
    "glcm_matrix",
    "keypoint_count",
    "load_gray",
    "mean_brightness",
    "orientation_histogram",
    "probabilistic_hough",
    "quantize",
    "read_features_csv",
    "to_grayscale",
    "write_features_csv",
]
