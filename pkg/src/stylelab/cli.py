"""Command-line interface.

`stylelab run` executes the whole pipeline; the stage subcommands run a
single stage against an existing run directory; `synth` builds a
self-contained synthetic corpus; `sample` embeds a vector file and picks
cluster representatives; `captions` and `embed` talk to the configured
provider endpoints. Exit status is 0 on success and 2 on a reported
error, whose message names the failing stage.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .corpus import load_embeddings, load_manifest, manifest_path
from .errors import ConfigError, StylelabError
from .pipeline import (
    STAGE_NAMES,
    RunContext,
    load_config,
    run_pipeline,
    run_stage,
)
from .providers import (
    DEFAULT_CAPTION_PROMPT,
    ProviderConfig,
    fetch_captions,
    fetch_embeddings,
)
from .sampling import kmeans, select_representatives, tsne_embed
from .semantics import text_key
from .synth import generate_corpus


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="path to a JSON run config")
    sub.add_argument("--out", help="output root (overrides the config)")
    sub.add_argument("--seed", type=int, help="run seed (overrides the config)")
    sub.add_argument("--provider-captions", help="caption endpoint URL")
    sub.add_argument("--provider-embeddings", help="embedding endpoint URL")


def _context(args: argparse.Namespace) -> RunContext:
    config = load_config(
        args.config,
        seed=args.seed,
        out=args.out,
        provider_captions=args.provider_captions,
        provider_embeddings=args.provider_embeddings,
    )
    return RunContext(config)


def _cmd_stage(name: str):
    def handler(args: argparse.Namespace) -> int:
        ctx = _context(args)
        run_stage(ctx, name)
        print(f"{name}: ok ({ctx.run_dir})")
        return 0

    return handler


def _cmd_run(args: argparse.Namespace) -> int:
    ctx = _context(args)
    run_dir = run_pipeline(ctx, stop_after=args.stage)
    print(f"run complete: {run_dir}")
    return 0


def _cmd_synth(args: argparse.Namespace) -> int:
    manifest = generate_corpus(
        args.out,
        seed=args.seed,
        n_stimuli=args.stimuli,
        styles=tuple(s.strip() for s in args.styles.split(",") if s.strip()),
        n_annotators=args.annotators,
        n_respondents=args.respondents,
        judgments_per_pair=args.judgments_per_pair,
        embedding_dim=args.embedding_dim,
        image_size=args.image_size,
    )
    print(f"corpus written: {manifest}")
    return 0


def _cmd_sample(args: argparse.Namespace) -> int:
    vectors = load_embeddings(args.vectors, expected_dim=None)
    result = tsne_embed(vectors, perplexity=args.perplexity, seed=args.seed)
    points = result.points()
    clustering = kmeans(points, args.clusters, seed=args.seed)
    selection = select_representatives(points, clustering, args.select, mode=args.mode)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    coords = out / "tsne_coords.csv"
    with coords.open("w", newline="", encoding="utf-8") as fh:
        fh.write("id,x,y,cluster\n")
        for p in points:
            fh.write(f"{p.id},{p.x!r},{p.y!r},{selection.assignments[p.id]}\n")
    ids_file = out / "selected_ids.txt"
    ids_file.write_text("\n".join(selection.selected_ids) + "\n", encoding="utf-8")
    print(f"coordinates: {coords}")
    print(f"selected {len(selection.selected_ids)} ids: {ids_file}")
    return 0


def _cmd_captions(args: argparse.Namespace) -> int:
    ctx = _context(args)
    if not ctx.config.provider_captions:
        raise ConfigError("no caption endpoint: set providers.captions or --provider-captions")
    corpus = ctx.corpus()
    base = Path(corpus.base_dir)
    images = {s.id: base / s.image_path for s in corpus.stimuli}
    existing = {s.id: s.caption for s in corpus.stimuli if s.caption}
    result = fetch_captions(
        images,
        ProviderConfig(url=ctx.config.provider_captions),
        prompt=DEFAULT_CAPTION_PROMPT,
        existing=existing,
    )
    merged = dict(existing)
    merged.update(result.captions)
    lines = []
    import json as _json

    for sid in sorted(merged):
        lines.append(_json.dumps({"id": sid, "caption": merged[sid]}))
    ctx.write_text("captions_fetched.jsonl", "\n".join(lines) + "\n")
    ctx.write_run_manifest()
    print(f"captions: {len(merged)} written to {ctx.run_dir / 'captions_fetched.jsonl'}")
    if result.failures:
        for sid in sorted(result.failures):
            print(f"caption failed for {sid}: {result.failures[sid]}", file=sys.stderr)
        return 2
    return 0


def _cmd_embed(args: argparse.Namespace) -> int:
    ctx = _context(args)
    if not ctx.config.provider_embeddings:
        raise ConfigError("no embedding endpoint: set providers.embeddings or --provider-embeddings")
    corpus = ctx.corpus()
    manifest = load_manifest(ctx.config.manifest)
    existing: dict = {}
    emb_path = manifest_path(manifest, "embeddings")
    if emb_path is not None and emb_path.exists():
        existing = load_embeddings(emb_path, expected_dim=corpus.embedding_dim)
    texts = [s.caption for s in corpus.stimuli if s.caption]
    texts += [r.text for r in corpus.responses]
    fetched = fetch_embeddings(
        texts,
        ProviderConfig(url=ctx.config.provider_embeddings),
        expected_dim=corpus.embedding_dim,
        existing=existing,
    )
    vectors = dict(existing)
    vectors.update(fetched)
    for s in corpus.stimuli:
        if s.caption and text_key(s.caption) in vectors:
            vectors[s.id] = vectors[text_key(s.caption)]
    ctx.write_json("embeddings_fetched.json", {
        key: [float(v) for v in vec] for key, vec in sorted(vectors.items())
    })
    ctx.write_run_manifest()
    print(f"embeddings: {len(vectors)} vectors written to "
          f"{ctx.run_dir / 'embeddings_fetched.json'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stylelab",
        description="Model consumer aesthetic perception from pairwise judgments, "
                    "images and text.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    run = subs.add_parser("run", help="run the full pipeline")
    _add_common(run)
    run.add_argument("--stage", choices=STAGE_NAMES,
                     help="stop after this stage")
    run.set_defaults(func=_cmd_run)

    for name, help_text in (
        ("validate", "check corpus integrity and write validation.json"),
        ("aggregate", "collapse annotator records into one row per stimulus"),
        ("extract", "compute visual features from the stimulus images"),
        ("fit-bt", "fit preference scores per style from pairwise judgments"),
        ("regress", "fit the per-style regression families"),
        ("ftest", "pooled interaction-vs-additive slope comparison"),
        ("correlate", "cross-style score correlation matrix"),
        ("distributions", "dip and Shapiro-Wilk tests per style"),
        ("align", "caption-response alignment scores"),
        ("report", "assemble report.json and summary.txt"),
        ("figures", "render the SVG figures"),
    ):
        sub = subs.add_parser(name, help=help_text)
        _add_common(sub)
        sub.set_defaults(func=_cmd_stage(name))

    synth = subs.add_parser("synth", help="generate a synthetic corpus")
    synth.add_argument("--out", required=True, help="corpus directory to create")
    synth.add_argument("--seed", type=int, required=True)
    synth.add_argument("--stimuli", type=int, default=12)
    synth.add_argument("--styles", default="classic,futuristic,sporty",
                       help="comma-separated style names")
    synth.add_argument("--annotators", type=int, default=3)
    synth.add_argument("--respondents", type=int, default=6)
    synth.add_argument("--judgments-per-pair", type=int, default=20)
    synth.add_argument("--embedding-dim", type=int, default=32)
    synth.add_argument("--image-size", type=int, default=128)
    synth.set_defaults(func=_cmd_synth)

    sample = subs.add_parser("sample", help="embed vectors in 2-D and pick representatives")
    sample.add_argument("--vectors", required=True, help="JSON file of id -> vector")
    sample.add_argument("--clusters", type=int, required=True)
    sample.add_argument("--select", type=int, required=True)
    sample.add_argument("--mode", choices=("global", "per_cluster"), default="global")
    sample.add_argument("--perplexity", type=float, default=30.0)
    sample.add_argument("--seed", type=int, default=0)
    sample.add_argument("--out", default=".")
    sample.set_defaults(func=_cmd_sample)

    captions = subs.add_parser("captions", help="fetch captions for uncaptioned stimuli")
    _add_common(captions)
    captions.set_defaults(func=_cmd_captions)

    embed = subs.add_parser("embed", help="fetch embedding vectors for captions and responses")
    _add_common(embed)
    embed.set_defaults(func=_cmd_embed)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except StylelabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
