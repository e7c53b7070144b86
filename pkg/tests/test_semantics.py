"""Cosine similarity and the caption-response alignment grid."""

import math

import numpy as np
import pytest

from stylelab.corpus import ResponseText
from stylelab.errors import (
    DimensionMismatchError,
    MissingCaptionEmbeddingError,
    MissingResponseEmbeddingError,
    ZeroVectorError,
)
from stylelab.semantics import (
    AlignmentScore,
    alignment_scores,
    cosine_similarity,
    require_caption_vectors,
    text_key,
)


def test_cosine_frozen_example():
    # (1,2,2)o(2,2,1) = 8, norms are 3 and 3: exactly 8/9
    u = np.array([1.0, 2.0, 2.0])
    v = np.array([2.0, 2.0, 1.0])
    assert cosine_similarity(u, v) == 8.0 / 9.0


def test_cosine_identities():
    rng = np.random.default_rng(3)
    for _ in range(20):
        u = rng.normal(size=6)
        v = rng.normal(size=6)
        c = cosine_similarity(u, v)
        assert -1.0 <= c <= 1.0
        assert math.isclose(cosine_similarity(v, u), c, rel_tol=0.0, abs_tol=1e-15)
        # invariant under positive rescaling of either argument
        assert math.isclose(cosine_similarity(3.7 * u, v), c, rel_tol=0.0, abs_tol=1e-12)
        assert math.isclose(cosine_similarity(u, 0.002 * v), c, rel_tol=0.0, abs_tol=1e-12)
        # negating one argument negates the cosine
        assert math.isclose(cosine_similarity(-u, v), -c, rel_tol=0.0, abs_tol=1e-12)
        # applying one permutation to both arguments changes nothing
        perm = rng.permutation(6)
        assert math.isclose(cosine_similarity(u[perm], v[perm]), c,
                            rel_tol=0.0, abs_tol=1e-12)

    assert cosine_similarity(np.array([2.0, 0.0]), np.array([5.0, 0.0])) == 1.0
    assert cosine_similarity(np.array([1.0, 0.0]), np.array([0.0, 4.0])) == 0.0


def test_cosine_guards():
    with pytest.raises(ZeroVectorError):
        cosine_similarity(np.zeros(3), np.ones(3))
    with pytest.raises(ZeroVectorError):
        cosine_similarity(np.ones(3), np.zeros(3))
    with pytest.raises(DimensionMismatchError):
        cosine_similarity(np.ones(3), np.ones(4))
    with pytest.raises(DimensionMismatchError):
        cosine_similarity(np.ones((2, 2)), np.ones(4))


def test_text_key_is_content_hash():
    assert text_key("abc") == text_key("abc")
    assert text_key("abc") != text_key("abd")
    # known sha256 of "abc"
    assert text_key("abc") == (
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
    )


def test_alignment_grid_means_per_style():
    captions = {
        "w1": np.array([1.0, 0.0]),
        "w2": np.array([0.0, 1.0]),
    }
    responses = [
        ResponseText("r1", "rugged", "angular"),
        ResponseText("r2", "rugged", "blocky"),
        ResponseText("r3", "sleek", "smooth"),
    ]
    vectors = {
        text_key("angular"): np.array([1.0, 0.0]),
        text_key("blocky"): np.array([0.0, 1.0]),
        text_key("smooth"): np.array([1.0, 1.0]),
    }
    scores = alignment_scores(captions, responses, vectors, ("rugged", "sleek"))
    grid = {(s.stimulus_id, s.style): s for s in scores}
    assert len(grid) == 4

    # rugged mean over cos=1 and cos=0
    assert grid[("w1", "rugged")].mean_cosine == 0.5
    assert grid[("w2", "rugged")].mean_cosine == 0.5
    assert grid[("w1", "rugged")].n_responses == 2
    # single sleek response at 45 degrees from both captions
    for sid in ("w1", "w2"):
        cell = grid[(sid, "sleek")]
        assert math.isclose(cell.mean_cosine, 1.0 / math.sqrt(2.0),
                            rel_tol=0.0, abs_tol=1e-15)
        assert cell.n_responses == 1

    # stimulus ids come out sorted within each style block
    rugged_ids = [s.stimulus_id for s in scores if s.style == "rugged"]
    assert rugged_ids == sorted(rugged_ids)


def test_alignment_skips_empty_style_but_not_missing_vector():
    captions = {"w1": np.array([1.0, 0.0])}
    responses = [ResponseText("r1", "rugged", "angular")]
    vectors = {text_key("angular"): np.array([1.0, 0.0])}

    scores = alignment_scores(captions, responses, vectors, ("rugged", "sleek"))
    assert [s.style for s in scores] == ["rugged"]

    with pytest.raises(MissingResponseEmbeddingError):
        alignment_scores(captions, responses, {}, ("rugged",))

    # responses for styles outside the configured set are ignored
    extra = responses + [ResponseText("r2", "plaid", "tartan")]
    scores = alignment_scores(captions, extra, vectors, ("rugged",))
    assert len(scores) == 1


def test_alignment_score_fields():
    s = AlignmentScore("w1", "rugged", 0.25, 3)
    assert (s.stimulus_id, s.style, s.mean_cosine, s.n_responses) == \
        ("w1", "rugged", 0.25, 3)


def test_require_caption_vectors():
    vectors = {"w1": np.ones(2), "w2": np.zeros(2), "w3": np.ones(2)}
    subset = require_caption_vectors(["w1", "w3"], vectors)
    assert sorted(subset) == ["w1", "w3"]
    with pytest.raises(MissingCaptionEmbeddingError):
        require_caption_vectors(["w1", "w9"], vectors)
