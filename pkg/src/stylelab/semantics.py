"""Caption-response semantic alignment.

Each stimulus carries one caption vector; each style keyword carries the
response texts people wrote for it. The alignment of stimulus s with
style k is the mean cosine similarity between s's caption vector and
every response vector for k, producing a stimuli-by-styles score grid.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass

import numpy as np

from .corpus import ResponseText
from .errors import (
    DimensionMismatchError,
    MissingCaptionEmbeddingError,
    MissingResponseEmbeddingError,
    ZeroVectorError,
)

log = logging.getLogger(__name__)


def text_key(text: str) -> str:
    """Stable content key for a text: sha256 of its UTF-8 bytes."""
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def cosine_similarity(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine of the angle between two vectors, clamped to [-1, 1]."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.ndim != 1 or v.ndim != 1:
        raise DimensionMismatchError("cosine expects 1-d vectors")
    if u.shape[0] != v.shape[0]:
        raise DimensionMismatchError(f"vector lengths differ: {u.shape[0]} vs {v.shape[0]}")
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        raise ZeroVectorError("cosine similarity is undefined for a zero vector")
    return min(1.0, max(-1.0, float(u @ v) / (nu * nv)))


@dataclass(frozen=True)
class AlignmentScore:
    stimulus_id: str
    style: str
    mean_cosine: float
    n_responses: int


def alignment_scores(
    caption_vectors: dict[str, np.ndarray],
    responses: list[ResponseText],
    response_vectors: dict[str, np.ndarray],
    styles: tuple[str, ...],
) -> list[AlignmentScore]:
    """Score every (stimulus, style) cell of the alignment grid.

    `caption_vectors` is keyed by stimulus id; `response_vectors` is keyed
    by `text_key` of the response text. A style with no responses is
    skipped with a warning rather than an error, so one empty style does
    not sink the rest of the grid. A response whose vector is absent is
    an error: silently dropping it would shift the style mean.
    """
    by_style: dict[str, list[np.ndarray]] = {style: [] for style in styles}
    for r in responses:
        if r.style not in by_style:
            continue
        key = text_key(r.text)
        vec = response_vectors.get(key)
        if vec is None:
            raise MissingResponseEmbeddingError(
                f"no vector for response by {r.respondent_id!r} (style {r.style!r}, key {key[:12]}...)"
            )
        by_style[r.style].append(np.asarray(vec, dtype=float))

    out: list[AlignmentScore] = []
    for style in styles:
        vecs = by_style[style]
        if not vecs:
            log.warning("style %r has no responses; alignment cells omitted", style)
            continue
        for sid in sorted(caption_vectors):
            cap = caption_vectors[sid]
            if cap is None:
                raise MissingCaptionEmbeddingError(f"no caption vector for stimulus {sid!r}")
            sims = [cosine_similarity(cap, v) for v in vecs]
            out.append(AlignmentScore(
                stimulus_id=sid,
                style=style,
                mean_cosine=sum(sims) / len(sims),
                n_responses=len(sims),
            ))
    return out


def require_caption_vectors(stimulus_ids: list[str], vectors: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    """Subset `vectors` to `stimulus_ids`, failing on any gap."""
    out = {}
    for sid in stimulus_ids:
        if sid not in vectors:
            raise MissingCaptionEmbeddingError(f"no caption vector for stimulus {sid!r}")
        out[sid] = vectors[sid]
    return out
