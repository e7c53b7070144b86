"""stylelab: modeling how consumers perceive product styling.

Pairwise style judgments become Bradley-Terry scores, product images
become designer-informed and low-level visual features, captions and
free-text style descriptions become semantic alignment scores, and a
reproducible pipeline ties the three together with regression tables,
distribution tests, and figures.
"""

__version__ = "0.1.0"

from . import corpus, errors, pipeline, ranking, sampling, semantics, stats, synth, vision

__all__ = [
    "corpus",
    "errors",
    "pipeline",
    "ranking",
    "sampling",
    "semantics",
    "stats",
    "synth",
    "vision",
    "__version__",
]
