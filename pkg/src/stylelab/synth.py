"""Synthetic corpus generation.

Builds a complete on-disk corpus from one seed: rendered wheel images,
planted per-style preference strengths, pairwise judgments sampled from
those strengths, multi-annotator feature records, style-keyword response
texts, captions, and stub embedding vectors. The embeddings are
constructed so that each style's caption-response alignment correlates
with the planted strengths in a chosen direction, which gives the
downstream regressions real signal to find.

Everything is a pure function of the seed, so regenerating into a fresh
directory yields byte-identical files.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from .corpus import (
    BOOLEAN_FEATURES,
    SPLIT_TYPE_CATEGORIES,
    AnnotationRecord,
    Judgment,
    ResponseText,
    Stimulus,
    Winner,
    save_annotations,
    save_captions,
    save_embeddings,
    save_judgments,
    save_responses,
    save_stimuli,
)
from .providers import stub_caption
from .semantics import text_key

DEFAULT_MINI_STYLES = ("classic", "futuristic", "sporty")

# style -> planted direction of the alignment effect; styles beyond the
# table fall back to the cycle (+, -, 0)
ALIGNMENT_DIRECTIONS = {
    "classic": -0.9,
    "futuristic": 0.9,
    "sporty": 0.9,
    "dynamic": 0.9,
    "aerodynamic": 0.0,
    "elegant": 0.0,
    "luxury": 0.0,
    "rugged": 0.0,
    "sleek": 0.0,
}

_RESPONSE_TEMPLATES = (
    "the {style} wheels had {adj} spokes that stood out immediately",
    "anything {style} showed a {adj} rim with strong contrast",
    "I looked for {adj} shapes when judging the {style} pairs",
    "{style} designs used {adj} lines radiating from the hub",
    "a {adj} center cap made the {style} ones feel finished",
    "the most {style} wheels combined {adj} edges with open gaps",
)
_RESPONSE_ADJECTIVES = (
    "angular", "tapered", "thin", "broad", "layered", "curved", "sharp", "split",
)


def _draw_wheel(size: int, spokes: int, rotation_deg: float, spoke_width: int,
                hub_frac: float) -> np.ndarray:
    """Render a rim-plus-spokes wheel as an 8-bit grayscale array."""
    img = Image.new("L", (size, size), 245)
    d = ImageDraw.Draw(img)
    c = (size - 1) / 2.0
    rim_r = 0.44 * size
    hub_r = hub_frac * size
    d.ellipse([c - rim_r, c - rim_r, c + rim_r, c + rim_r], outline=30, width=4)
    for i in range(spokes):
        a = math.radians(rotation_deg + 360.0 * i / spokes)
        d.line(
            [c + hub_r * math.cos(a), c + hub_r * math.sin(a),
             c + (rim_r - 3) * math.cos(a), c + (rim_r - 3) * math.sin(a)],
            fill=40, width=spoke_width,
        )
    d.ellipse([c - hub_r, c - hub_r, c + hub_r, c + hub_r], fill=60)
    return np.asarray(img, dtype=np.uint8)


def _alignment_direction(style: str, index: int) -> float:
    if style in ALIGNMENT_DIRECTIONS:
        return ALIGNMENT_DIRECTIONS[style]
    return (0.9, -0.9, 0.0)[index % 3]


def _sample_judgments(
    rng: np.random.Generator,
    style: str,
    ids: list[str],
    lambdas: np.ndarray,
    per_pair: int,
    n_judges: int,
) -> list[Judgment]:
    out: list[Judgment] = []
    t = 0
    for i in range(len(ids)):
        for j in range(i + 1, len(ids)):
            p_left = 1.0 / (1.0 + math.exp(lambdas[j] - lambdas[i]))
            for _ in range(per_pair):
                judge = f"judge_{t % n_judges + 1:02d}"
                # alternate presentation side so neither slot is privileged
                flip = t % 2 == 1
                left, right = (ids[j], ids[i]) if flip else (ids[i], ids[j])
                left_wins = rng.random() < (1.0 - p_left if flip else p_left)
                out.append(Judgment(
                    judge_id=judge,
                    style=style,
                    left_id=left,
                    right_id=right,
                    winner=Winner.LEFT if left_wins else Winner.RIGHT,
                ))
                t += 1
    return out


def _marginals_ok(judgments: list[Judgment], ids: list[str]) -> bool:
    wins = {sid: 0 for sid in ids}
    losses = {sid: 0 for sid in ids}
    for j in judgments:
        wins[j.winner_id] += 1
        losses[j.loser_id] += 1
    return all(wins[sid] > 0 and losses[sid] > 0 for sid in ids)


def generate_corpus(
    out_dir: str | Path,
    seed: int,
    n_stimuli: int = 12,
    styles: tuple[str, ...] = DEFAULT_MINI_STYLES,
    n_annotators: int = 3,
    n_respondents: int = 6,
    judgments_per_pair: int = 20,
    embedding_dim: int = 32,
    image_size: int = 128,
) -> Path:
    """Write a full synthetic corpus under `out_dir`; returns the manifest path."""
    out_dir = Path(out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    root = np.random.SeedSequence(seed)
    (ss_img, ss_feat, ss_lambda, ss_judge, ss_annot,
     ss_resp, ss_embed) = root.spawn(7)

    ids = [f"wheel_{i:03d}" for i in range(n_stimuli)]

    # images: spoke count cycles 3..8, the rest of the geometry is seeded
    rng_img = np.random.default_rng(ss_img)
    spokes = [3 + (i % 6) for i in range(n_stimuli)]
    stimuli = []
    for i, sid in enumerate(ids):
        arr = _draw_wheel(
            image_size,
            spokes[i],
            rotation_deg=float(rng_img.uniform(0.0, 360.0)),
            spoke_width=int(rng_img.integers(3, 6)),
            hub_frac=float(rng_img.uniform(0.06, 0.11)),
        )
        rel = f"images/{sid}.png"
        Image.fromarray(arr, mode="L").save(out_dir / rel)
        stimuli.append(Stimulus(id=sid, image_path=rel))
    save_stimuli(out_dir / "stimuli.csv", stimuli)

    # ground-truth designer features
    rng_feat = np.random.default_rng(ss_feat)
    truth_bool = {
        sid: {name: bool(rng_feat.random() < 0.5) for name in BOOLEAN_FEATURES}
        for sid in ids
    }
    truth_split = {
        sid: SPLIT_TYPE_CATEGORIES[int(rng_feat.integers(3))] for sid in ids
    }

    # planted strengths: a few boolean features push each style's score,
    # then the spread is normalized to the 0.65 scale
    rng_lambda = np.random.default_rng(ss_lambda)
    lambdas: dict[str, np.ndarray] = {}
    for style in styles:
        drivers = rng_lambda.choice(len(BOOLEAN_FEATURES), size=3, replace=False)
        weights = rng_lambda.choice([-1.0, 1.0], size=3)
        raw = np.array([
            sum(w * float(truth_bool[sid][BOOLEAN_FEATURES[d]])
                for d, w in zip(drivers, weights))
            for sid in ids
        ])
        raw = raw + rng_lambda.normal(0.0, 0.5, size=n_stimuli)
        raw = raw - raw.mean()
        spread = float(raw.std(ddof=1))
        lambdas[style] = raw * (0.65 / spread) if spread > 0 else raw

    # judgments, re-drawn (rare) until no item is all-wins or all-losses
    judgments: list[Judgment] = []
    for style in styles:
        for attempt in range(50):
            rng_judge = np.random.default_rng(ss_judge.spawn(1)[0])
            drawn = _sample_judgments(
                rng_judge, style, ids, lambdas[style], judgments_per_pair,
                n_judges=max(3, n_annotators),
            )
            if _marginals_ok(drawn, ids):
                judgments.extend(drawn)
                break
        else:
            raise RuntimeError(f"could not draw non-degenerate judgments for {style!r}")
    save_judgments(out_dir / "judgments.csv", judgments)

    # annotator records: boolean flips 10% of the time, spoke counts are
    # off by one 15% of the time, split types flip 10% of the time
    rng_annot = np.random.default_rng(ss_annot)
    records: list[AnnotationRecord] = []
    for sid in ids:
        for a in range(1, n_annotators + 1):
            annotator = f"annot_{a:02d}"
            for name in BOOLEAN_FEATURES:
                value = truth_bool[sid][name]
                if rng_annot.random() < 0.10:
                    value = not value
                records.append(AnnotationRecord(annotator, sid, name, value))
            count = spokes[ids.index(sid)]
            if rng_annot.random() < 0.15:
                count = max(0, count + int(rng_annot.choice([-1, 1])))
            records.append(AnnotationRecord(annotator, sid, "spoke_count", count))
            split = truth_split[sid]
            if rng_annot.random() < 0.10:
                split = SPLIT_TYPE_CATEGORIES[int(rng_annot.integers(3))]
            records.append(AnnotationRecord(annotator, sid, "split_type", split))
    save_annotations(out_dir / "annotations.csv", records)

    # response texts per style
    rng_resp = np.random.default_rng(ss_resp)
    responses: list[ResponseText] = []
    for style in styles:
        for r in range(1, n_respondents + 1):
            template = _RESPONSE_TEMPLATES[int(rng_resp.integers(len(_RESPONSE_TEMPLATES)))]
            adj = _RESPONSE_ADJECTIVES[int(rng_resp.integers(len(_RESPONSE_ADJECTIVES)))]
            responses.append(ResponseText(
                respondent_id=f"resp_{r:02d}",
                style=style,
                text=template.format(style=style, adj=adj),
            ))
    save_responses(out_dir / "responses.csv", responses)

    captions = {sid: stub_caption(sid, seed=seed) for sid in ids}
    save_captions(out_dir / "captions.jsonl", captions)

    # embeddings: each style gets a unit direction u_k; response vectors
    # scatter around their style's direction; caption vectors mix a private
    # component with sum_k direction_k * lambda_k(s) * u_k, so the mean
    # cosine against style k tracks lambda_k(s) with the planted sign
    rng_embed = np.random.default_rng(ss_embed)
    style_dirs = {}
    for style in styles:
        v = rng_embed.standard_normal(embedding_dim)
        style_dirs[style] = v / np.linalg.norm(v)

    vectors: dict[str, np.ndarray] = {}
    for resp in responses:
        key = text_key(resp.text)
        if key in vectors:
            continue
        v = style_dirs[resp.style] + 0.15 * rng_embed.standard_normal(embedding_dim)
        vectors[key] = v / np.linalg.norm(v)

    for idx, sid in enumerate(ids):
        private = rng_embed.standard_normal(embedding_dim)
        private = private / np.linalg.norm(private)
        mix = 0.8 * private
        for s_idx, style in enumerate(styles):
            direction = _alignment_direction(style, s_idx)
            mix = mix + direction * float(lambdas[style][idx]) * style_dirs[style]
        vectors[sid] = mix / np.linalg.norm(mix)
    save_embeddings(out_dir / "embeddings.json", vectors)

    manifest = {
        "styles": list(styles),
        "embedding_dim": embedding_dim,
        "stimuli": "stimuli.csv",
        "judgments": "judgments.csv",
        "annotations": "annotations.csv",
        "responses": "responses.csv",
        "captions": "captions.jsonl",
        "embeddings": "embeddings.json",
    }
    manifest_file = out_dir / "manifest.json"
    manifest_file.write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )

    truth = {
        "seed": seed,
        "lambdas": {style: [float(v) for v in lambdas[style]] for style in styles},
        "spokes": {sid: spokes[i] for i, sid in enumerate(ids)},
        "alignment_directions": {
            style: _alignment_direction(style, i) for i, style in enumerate(styles)
        },
    }
    (out_dir / "truth.json").write_text(
        json.dumps(truth, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return manifest_file
