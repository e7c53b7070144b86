"""Pipeline, report, figures and CLI behavior on a synthetic corpus."""

import csv
import hashlib
import json
import shutil

import numpy as np
import pytest

from stylelab.cli import main
from stylelab.corpus import ResponseText, load_corpus, validate_corpus
from stylelab.errors import (
    ConfigError,
    MissingStageError,
    NoResponsesError,
    StageError,
)
from stylelab.pipeline import (
    RunContext,
    load_config,
    read_bt_scores,
    read_regression_rows,
    run_stage,
)
from stylelab.report import bigram_frequencies
from stylelab.synth import generate_corpus

SEED = 123


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """One synthetic corpus plus one completed run, shared read-only."""
    root = tmp_path_factory.mktemp("ws")
    manifest = generate_corpus(root / "corpus", seed=SEED)
    config = root / "config.json"
    config.write_text(json.dumps({
        "manifest": "corpus/manifest.json",
        "seed": SEED,
        "out": "runs",
        "dip_reps": 500,
    }))
    rc = main(["run", "--config", str(config)])
    assert rc == 0
    return {
        "root": root,
        "manifest": manifest,
        "config": config,
        "run_dir": root / "runs" / f"run-seed{SEED}",
    }


def corpus_copy(workspace, tmp_path):
    dst = tmp_path / "corpus"
    shutil.copytree(workspace["root"] / "corpus", dst)
    return dst


# --------------------------------------------------------------------------
# synthetic corpus
# --------------------------------------------------------------------------

def test_synth_corpus_validates_clean(workspace):
    corpus = load_corpus(workspace["manifest"])
    report = validate_corpus(corpus)
    assert report.ok
    assert report.stats["n_stimuli"] == 12
    assert report.stats["n_captioned"] == 12
    assert sorted(report.stats["judgments_per_style"]) == [
        "classic", "futuristic", "sporty"]


def test_synth_regeneration_is_byte_identical(tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    generate_corpus(a, seed=77, n_stimuli=6, judgments_per_pair=8)
    generate_corpus(b, seed=77, n_stimuli=6, judgments_per_pair=8)
    files_a = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
    files_b = sorted(p.relative_to(b) for p in b.rglob("*") if p.is_file())
    assert files_a == files_b
    for rel in files_a:
        assert (a / rel).read_bytes() == (b / rel).read_bytes(), rel


def test_synth_seed_changes_output(tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    generate_corpus(a, seed=77, n_stimuli=6, judgments_per_pair=8)
    generate_corpus(b, seed=78, n_stimuli=6, judgments_per_pair=8)
    assert (a / "judgments.csv").read_bytes() != (b / "judgments.csv").read_bytes()


def test_synth_embeddings_cover_captions_and_responses(workspace):
    from stylelab.corpus import load_embeddings
    from stylelab.semantics import text_key

    corpus = load_corpus(workspace["manifest"])
    vectors = load_embeddings(workspace["root"] / "corpus" / "embeddings.json",
                              expected_dim=32)
    for s in corpus.stimuli:
        assert s.id in vectors
    for r in corpus.responses:
        assert text_key(r.text) in vectors


# --------------------------------------------------------------------------
# config
# --------------------------------------------------------------------------

def test_config_requires_seed(tmp_path, workspace):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"manifest": str(workspace["manifest"])}))
    with pytest.raises(ConfigError, match="seed"):
        load_config(cfg)
    # the CLI flag satisfies the requirement
    assert load_config(cfg, seed=5).seed == 5


def test_config_requires_existing_manifest(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"manifest": "nowhere/manifest.json", "seed": 1}))
    with pytest.raises(ConfigError, match="manifest"):
        load_config(cfg)
    with pytest.raises(ConfigError, match="manifest"):
        load_config(None, seed=1)


def test_config_rejects_unknown_keys_and_bad_alpha(tmp_path, workspace):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({
        "manifest": str(workspace["manifest"]), "seed": 1, "typo_key": 3}))
    with pytest.raises(ConfigError, match="typo_key"):
        load_config(cfg)
    cfg.write_text(json.dumps({
        "manifest": str(workspace["manifest"]), "seed": 1, "alpha": 1.5}))
    with pytest.raises(ConfigError, match="alpha"):
        load_config(cfg)


def test_cli_seed_override_changes_run_dir(workspace):
    cfg = load_config(workspace["config"], seed=999)
    assert cfg.seed == 999
    assert RunContext(cfg).run_dir.name == "run-seed999"


# --------------------------------------------------------------------------
# full run artifacts
# --------------------------------------------------------------------------

def test_run_emits_bt_scores_for_every_style_and_stimulus(workspace):
    rows = list(csv.DictReader(
        (workspace["run_dir"] / "bt_scores.csv").open(encoding="utf-8")))
    assert len(rows) == 36
    styles = {r["style"] for r in rows}
    assert styles == {"classic", "futuristic", "sporty"}
    for r in rows:
        float(r["bt_score"])


def test_run_emits_nine_regression_tables(workspace):
    count = 0
    for name in ("regression_designer.csv", "regression_cv.csv",
                 "regression_alignment.csv"):
        rows = read_regression_rows(workspace["run_dir"] / name)
        per_style = {r["style"] for r in rows}
        assert per_style == {"classic", "futuristic", "sporty"}, name
        count += len(per_style)
        for r in rows:
            assert r["ci_lo"] <= r["beta"] <= r["ci_hi"]
    assert count == 9


def test_run_emits_correlation_matrix(workspace):
    from stylelab.pipeline import read_correlation_csv

    names, values = read_correlation_csv(workspace["run_dir"] / "correlation.csv")
    assert names == ["classic", "futuristic", "sporty"]
    assert values.shape == (3, 3)
    assert np.allclose(np.diag(values), 1.0)
    assert np.allclose(values, values.T)


def test_run_emits_figures(workspace):
    svgs = sorted(p.name for p in workspace["run_dir"].glob("*.svg"))
    assert len(svgs) >= 4
    assert "bt_distributions.svg" in svgs
    assert "correlation_heatmap.svg" in svgs
    assert "alignment_scatter.svg" in svgs
    assert {"forest_classic.svg", "forest_futuristic.svg",
            "forest_sporty.svg"} <= set(svgs)
    for name in svgs:
        head = (workspace["run_dir"] / name).read_bytes()[:500]
        assert b"<svg" in head or b"<?xml" in head


def test_run_manifest_hashes_every_artifact(workspace):
    run_dir = workspace["run_dir"]
    manifest = json.loads((run_dir / "manifest.json").read_text())
    assert manifest["seed"] == SEED
    on_disk = {p.name for p in run_dir.iterdir()} - {"manifest.json"}
    assert set(manifest["files"]) == on_disk
    for rel, digest in manifest["files"].items():
        actual = hashlib.sha256((run_dir / rel).read_bytes()).hexdigest()
        assert actual == digest, rel


def test_rerun_is_byte_identical(workspace, tmp_path):
    corpus = corpus_copy(workspace, tmp_path)
    cfg = tmp_path / "config.json"
    cfg.write_text(json.dumps({
        "manifest": "corpus/manifest.json",
        "seed": SEED,
        "out": "runs",
        "dip_reps": 500,
    }))
    assert main(["run", "--config", str(cfg)]) == 0
    other = tmp_path / "runs" / f"run-seed{SEED}"
    ours = workspace["run_dir"]
    names = sorted(p.name for p in ours.iterdir())
    assert names == sorted(p.name for p in other.iterdir())
    for name in names:
        assert (ours / name).read_bytes() == (other / name).read_bytes(), name


def test_alignment_csv_covers_the_grid(workspace):
    rows = list(csv.DictReader(
        (workspace["run_dir"] / "alignment.csv").open(encoding="utf-8")))
    assert len(rows) == 36
    assert all(int(r["n_responses"]) == 6 for r in rows)
    assert all(-1.0 <= float(r["mean_cosine"]) <= 1.0 for r in rows)


def test_alignment_slopes_recover_planted_directions(workspace):
    # the generator plants a negative alignment effect for classic and
    # positive ones for futuristic and sporty
    rows = read_regression_rows(workspace["run_dir"] / "regression_alignment.csv")
    slope = {r["style"]: r for r in rows if r["feature"] == "mean_cosine"}
    assert slope["classic"]["beta"] < 0
    assert slope["futuristic"]["beta"] > 0
    assert slope["sporty"]["beta"] > 0
    assert all(r["p"] < 0.05 for r in slope.values())
    f_test = json.loads((workspace["run_dir"] / "f_test.json").read_text())
    assert f_test["p_value"] < 0.05
    assert f_test["slopes_differ_at_alpha"] is True
    assert f_test["df1"] == 2


def test_distributions_json_has_both_tests_per_style(workspace):
    dist = json.loads((workspace["run_dir"] / "distributions.json").read_text())
    assert sorted(dist) == ["classic", "futuristic", "sporty"]
    for style, entry in dist.items():
        assert 0.0 <= entry["dip"]["p_value"] <= 1.0
        assert entry["dip"]["monte_carlo_reps"] == 500
        assert 0.0 <= entry["shapiro_wilk"]["p_value"] <= 1.0
        assert entry["shapiro_wilk"]["n"] == 12


# --------------------------------------------------------------------------
# report
# --------------------------------------------------------------------------

def test_summary_text_required_phrases(workspace):
    text = (workspace["run_dir"] / "summary.txt").read_text()
    assert "an average of 60.0 ratings" in text
    report = json.loads((workspace["run_dir"] / "report.json").read_text())
    has_empty_family = any(
        not terms
        for style in report["styles"].values()
        for terms in style["significant"].values()
    )
    if has_empty_family:
        assert "none at p<.05" in text
    assert "Interaction vs additive" in text


def test_report_top_lists_are_truncated_and_sorted(workspace):
    report = json.loads((workspace["run_dir"] / "report.json").read_text())
    bt = read_bt_scores(workspace["run_dir"] / "bt_scores.csv")
    for style, entry in report["styles"].items():
        top = entry["top"]
        assert len(top) == 5
        scores = [t["bt_score"] for t in top]
        assert scores == sorted(scores, reverse=True)
        assert scores[0] == max(bt[style].values())


def test_report_alignment_betas_match_regression_table(workspace):
    report = json.loads((workspace["run_dir"] / "report.json").read_text())
    rows = read_regression_rows(workspace["run_dir"] / "regression_alignment.csv")
    table = {(r["style"], r["feature"]): r["beta"] for r in rows}
    for style, entry in report["styles"].items():
        for term in entry["significant"]["alignment"]:
            assert term["beta"] == table[(style, term["feature"])]


def test_figure_slope_annotation_matches_table(workspace):
    rows = read_regression_rows(workspace["run_dir"] / "regression_alignment.csv")
    svg = (workspace["run_dir"] / "alignment_scatter.svg").read_text()
    for r in rows:
        if r["feature"] == "mean_cosine":
            assert f"beta = {r['beta']:.3f}" in svg


def test_heatmap_diagonal_renders_unit_cells(workspace):
    svg = (workspace["run_dir"] / "correlation_heatmap.svg").read_text()
    assert "1.00" in svg


# --------------------------------------------------------------------------
# bigrams
# --------------------------------------------------------------------------

def test_bigram_counts_and_tie_order():
    rows = [ResponseText("r1", "sporty", "Thick, dark spokes!")]
    assert bigram_frequencies(rows, "sporty") == [
        ("dark spokes", 1), ("thick dark", 1)]


def test_bigram_duplicate_response_doubles_counts():
    rows = [
        ResponseText("r1", "sporty", "thick dark spokes"),
        ResponseText("r2", "sporty", "thick dark spokes"),
    ]
    assert bigram_frequencies(rows, "sporty") == [
        ("dark spokes", 2), ("thick dark", 2)]


def test_bigram_stop_word_pairs_dropped():
    rows = [ResponseText("r1", "sporty", "the rim of the wheel")]
    pairs = dict(bigram_frequencies(rows, "sporty"))
    assert "of the" not in pairs
    assert pairs["the rim"] == 1
    assert pairs["the wheel"] == 1


def test_bigram_ignores_other_styles_and_raises_on_none():
    rows = [ResponseText("r1", "classic", "angular spokes")]
    with pytest.raises(NoResponsesError):
        bigram_frequencies(rows, "sporty")
    assert bigram_frequencies(rows, "classic") == [("angular spokes", 1)]


def test_bigrams_toggle_emits_per_style_tables(workspace, tmp_path):
    corpus = corpus_copy(workspace, tmp_path)
    cfg = tmp_path / "config.json"
    cfg.write_text(json.dumps({
        "manifest": "corpus/manifest.json",
        "seed": SEED,
        "out": "runs",
        "dip_reps": 500,
        "bigrams": True,
    }))
    assert main(["run", "--config", str(cfg)]) == 0
    run_dir = tmp_path / "runs" / f"run-seed{SEED}"
    for style in ("classic", "futuristic", "sporty"):
        path = run_dir / f"bigrams_{style}.csv"
        assert path.exists()
        rows = list(csv.DictReader(path.open(encoding="utf-8")))
        assert rows and all(int(r["count"]) >= 1 for r in rows)
        counts = [int(r["count"]) for r in rows]
        assert counts == sorted(counts, reverse=True)
    manifest = json.loads((run_dir / "manifest.json").read_text())
    assert "bigrams_classic.csv" in manifest["files"]


# --------------------------------------------------------------------------
# staging and failure behavior
# --------------------------------------------------------------------------

def test_stage_stop_halts_after_named_stage(workspace, tmp_path):
    corpus = corpus_copy(workspace, tmp_path)
    cfg = tmp_path / "config.json"
    cfg.write_text(json.dumps({
        "manifest": "corpus/manifest.json", "seed": 4, "out": "runs",
        "dip_reps": 300,
    }))
    assert main(["run", "--config", str(cfg), "--stage", "fit-bt"]) == 0
    run_dir = tmp_path / "runs" / "run-seed4"
    names = {p.name for p in run_dir.iterdir()}
    assert "bt_scores.csv" in names
    assert "regression_designer.csv" not in names
    assert "report.json" not in names


def test_standalone_stages_resume_from_persisted_outputs(workspace, tmp_path):
    corpus = corpus_copy(workspace, tmp_path)
    cfg = tmp_path / "config.json"
    cfg.write_text(json.dumps({
        "manifest": "corpus/manifest.json", "seed": 4, "out": "runs",
        "dip_reps": 300,
    }))
    assert main(["run", "--config", str(cfg), "--stage", "fit-bt"]) == 0
    run_dir = tmp_path / "runs" / "run-seed4"

    # report cannot build yet: the regression stage has not run
    config = load_config(cfg)
    ctx = RunContext(config)
    with pytest.raises(StageError, match="run the 'regress' stage first"):
        run_stage(ctx, "report")

    for stage in ("regress", "ftest", "correlate", "distributions", "align",
                  "report", "figures"):
        assert main([stage, "--config", str(cfg)]) == 0
    names = {p.name for p in run_dir.iterdir()}
    assert "report.json" in names and "alignment_scatter.svg" in names
    manifest = json.loads((run_dir / "manifest.json").read_text())
    assert "bt_scores.csv" in manifest["files"]
    assert "alignment_scatter.svg" in manifest["files"]


def test_missing_image_fails_extract_and_keeps_earlier_artifacts(workspace, tmp_path, capsys):
    corpus = corpus_copy(workspace, tmp_path)
    (corpus / "images" / "wheel_003.png").unlink()
    cfg = tmp_path / "config.json"
    cfg.write_text(json.dumps({
        "manifest": "corpus/manifest.json", "seed": 8, "out": "runs",
        "dip_reps": 300,
    }))
    rc = main(["run", "--config", str(cfg)])
    err = capsys.readouterr().err
    assert rc == 2
    assert "extract" in err and "wheel_003" in err
    run_dir = tmp_path / "runs" / "run-seed8"
    names = {p.name for p in run_dir.iterdir()}
    assert "validation.json" in names and "features_designer.csv" in names
    assert "features_cv.csv" not in names
    manifest = json.loads((run_dir / "manifest.json").read_text())
    assert "validation.json" in manifest["files"]


def test_blocking_validation_finding_halts_run(workspace, tmp_path, capsys):
    corpus = corpus_copy(workspace, tmp_path)
    with (corpus / "annotations.csv").open("a", encoding="utf-8") as fh:
        fh.write("annot_01,wheel_999,hollowed,TRUE\n")
    cfg = tmp_path / "config.json"
    cfg.write_text(json.dumps({
        "manifest": "corpus/manifest.json", "seed": 9, "out": "runs",
    }))
    rc = main(["run", "--config", str(cfg)])
    err = capsys.readouterr().err
    assert rc == 2
    assert "validate" in err and "UnknownStimulus" in err
    payload = json.loads(
        (tmp_path / "runs" / "run-seed9" / "validation.json").read_text())
    assert payload["ok"] is False
    assert any(f["kind"] == "UnknownStimulus" for f in payload["findings"])


def test_figures_before_any_run_reports_missing_stage(workspace, tmp_path, capsys):
    corpus = corpus_copy(workspace, tmp_path)
    cfg = tmp_path / "config.json"
    cfg.write_text(json.dumps({
        "manifest": "corpus/manifest.json", "seed": 10, "out": "runs",
    }))
    rc = main(["figures", "--config", str(cfg)])
    err = capsys.readouterr().err
    assert rc == 2
    assert "fit-bt" in err


def test_run_stage_rejects_unknown_stage_name(workspace):
    ctx = RunContext(load_config(workspace["config"]))
    with pytest.raises(ConfigError, match="unknown stage"):
        run_stage(ctx, "polish")


# --------------------------------------------------------------------------
# sample subcommand
# --------------------------------------------------------------------------

def test_sample_writes_coords_and_representatives(tmp_path):
    rng = np.random.default_rng(42)
    vectors = {}
    for i in range(30):
        vectors[f"a{i:02d}"] = list(rng.normal(0.0, 1.0, 16))
    for i in range(30):
        vectors[f"b{i:02d}"] = list(rng.normal(0.0, 1.0, 16) + 12.0)
    vec_file = tmp_path / "vectors.json"
    vec_file.write_text(json.dumps(vectors))

    rc = main(["sample", "--vectors", str(vec_file), "--clusters", "2",
               "--select", "10", "--perplexity", "10", "--seed", "5",
               "--out", str(tmp_path / "out")])
    assert rc == 0
    rows = list(csv.DictReader(
        (tmp_path / "out" / "tsne_coords.csv").open(encoding="utf-8")))
    assert len(rows) == 60
    assert {r["id"] for r in rows} == set(vectors)
    clusters = {r["id"]: int(r["cluster"]) for r in rows}
    # the two planted blobs separate perfectly
    assert len({clusters[f"a{i:02d}"] for i in range(30)}) == 1
    assert len({clusters[f"b{i:02d}"] for i in range(30)}) == 1
    assert clusters["a00"] != clusters["b00"]

    selected = (tmp_path / "out" / "selected_ids.txt").read_text().split()
    assert len(selected) == 10
    assert len(set(selected)) == 10
    assert {clusters[sid] for sid in selected} == {0, 1}


# --------------------------------------------------------------------------
# provider subcommands
# --------------------------------------------------------------------------

def test_captions_and_embed_subcommands_roundtrip(workspace, tmp_path):
    from stylelab.providers import StubProviderServer

    corpus = corpus_copy(workspace, tmp_path)
    manifest = json.loads((corpus / "manifest.json").read_text())
    del manifest["captions"]
    del manifest["embeddings"]
    (corpus / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True))
    cfg = tmp_path / "config.json"
    cfg.write_text(json.dumps({
        "manifest": "corpus/manifest.json", "seed": 9, "out": "runs",
    }))
    with StubProviderServer(dim=32, seed=0) as server:
        assert main(["captions", "--config", str(cfg),
                     "--provider-captions", server.url("/captions")]) == 0
        assert main(["embed", "--config", str(cfg),
                     "--provider-embeddings", server.url("/embeddings")]) == 0
    run_dir = tmp_path / "runs" / "run-seed9"
    lines = (run_dir / "captions_fetched.jsonl").read_text().splitlines()
    assert len(lines) == 12
    for line in lines:
        record = json.loads(line)
        assert 20 <= len(record["caption"].split()) <= 400
    vectors = json.loads((run_dir / "embeddings_fetched.json").read_text())
    assert all(len(v) == 32 for v in vectors.values())


def test_run_uses_embedding_provider_when_corpus_has_no_vectors(workspace, tmp_path):
    from stylelab.providers import StubProviderServer

    corpus = corpus_copy(workspace, tmp_path)
    manifest = json.loads((corpus / "manifest.json").read_text())
    del manifest["embeddings"]
    (corpus / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True))
    with StubProviderServer(dim=32, seed=0) as server:
        cfg = tmp_path / "config.json"
        cfg.write_text(json.dumps({
            "manifest": "corpus/manifest.json", "seed": 11, "out": "runs",
            "dip_reps": 300,
            "providers": {"embeddings": server.url("/embeddings")},
        }))
        assert main(["run", "--config", str(cfg)]) == 0
        assert server.request_count >= 1
    run_dir = tmp_path / "runs" / "run-seed11"
    assert (run_dir / "embeddings_fetched.json").exists()
    assert (run_dir / "report.json").exists()


def test_run_without_any_embedding_source_fails_in_regress(workspace, tmp_path, capsys):
    corpus = corpus_copy(workspace, tmp_path)
    manifest = json.loads((corpus / "manifest.json").read_text())
    del manifest["embeddings"]
    (corpus / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True))
    cfg = tmp_path / "config.json"
    cfg.write_text(json.dumps({
        "manifest": "corpus/manifest.json", "seed": 12, "out": "runs",
        "dip_reps": 300,
    }))
    rc = main(["run", "--config", str(cfg)])
    err = capsys.readouterr().err
    assert rc == 2
    assert "regress" in err and "embedding" in err
