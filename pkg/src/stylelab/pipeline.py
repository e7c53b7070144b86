"""End-to-end analysis runs.

A run takes a corpus manifest plus a config and emits every analysis
artifact into a seed-stamped directory: validation report, aggregated
designer features, visual features, preference scores with diagnostics,
three regression families per style, the pooled interaction test,
cross-style correlations, distribution tests, alignment scores, the text
report, and the figures. Stages execute in a fixed order; a failing
stage halts the ones after it but leaves completed artifacts on disk,
and the error names the stage. Every stage reads its inputs from the
files earlier stages persisted, so each one can also be run on its own
against an existing run directory.

All artifacts are deterministic functions of (corpus bytes, config,
seed): ids are iterated in sorted order, floats are written with repr,
JSON is sorted and the run directory name carries the seed instead of a
timestamp. A rerun with the same inputs reproduces every file byte for
byte, and manifest.json records the sha256 of each emitted file.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .corpus import (
    BOOLEAN_FEATURES,
    SPLIT_TYPE_CATEGORIES,
    SPLIT_TYPE_FEATURE,
    SPOKE_COUNT_FEATURE,
    Corpus,
    aggregate_annotations,
    load_corpus,
    load_embeddings,
    validate_corpus,
)
from .errors import (
    ConfigError,
    MissingStageError,
    StageError,
    StylelabError,
)
from .providers import ProviderConfig, fetch_embeddings
from .ranking import bt_descriptives, fit_per_style, top_items
from .semantics import alignment_scores, require_caption_vectors, text_key
from .stats import (
    design_matrix,
    dip_test,
    drop_zero_variance,
    f_sf,
    listwise_complete,
    nested_f_test,
    ols_fit,
    pearson_corr_matrix,
    shapiro_wilk,
)
from .vision.features import (
    FEATURE_COLUMNS,
    CvConfig,
    extract_features_for_images,
    read_features_csv,
    write_features_csv,
)

log = logging.getLogger(__name__)

# validation findings of these kinds stop the run; the rest are recorded
# in validation.json and logged but do not block analysis
FATAL_FINDING_KINDS = frozenset({
    "UnknownStimulus",
    "UnknownStyle",
    "UnknownFeature",
    "DisconnectedGraph",
})

ARTIFACTS = {
    "validation": "validation.json",
    "designer": "features_designer.csv",
    "cv": "features_cv.csv",
    "bt_scores": "bt_scores.csv",
    "bt_diagnostics": "bt_diagnostics.json",
    "reg_designer": "regression_designer.csv",
    "reg_cv": "regression_cv.csv",
    "reg_alignment": "regression_alignment.csv",
    "reg_summary": "regression_summary.json",
    "f_test": "f_test.json",
    "correlation": "correlation.csv",
    "distributions": "distributions.json",
    "alignment": "alignment.csv",
    "report_json": "report.json",
    "report_text": "summary.txt",
    "run_manifest": "manifest.json",
}

# which stage produces each artifact, for error messages when a
# standalone stage finds its inputs missing
ARTIFACT_STAGE = {
    "validation": "validate",
    "designer": "aggregate",
    "cv": "extract",
    "bt_scores": "fit-bt",
    "bt_diagnostics": "fit-bt",
    "reg_designer": "regress",
    "reg_cv": "regress",
    "reg_alignment": "regress",
    "reg_summary": "regress",
    "f_test": "ftest",
    "correlation": "correlate",
    "distributions": "distributions",
    "alignment": "align",
}


# --------------------------------------------------------------------------
# Config
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PipelineConfig:
    manifest: Path
    seed: int
    out_dir: Path
    alpha: float = 0.05
    dip_reps: int = 10000
    bigrams: bool = False
    provider_captions: str | None = None
    provider_embeddings: str | None = None
    cv: CvConfig = field(default_factory=CvConfig)
    bt_tol: float = 1e-8
    bt_max_iters: int = 10000


def load_config(
    path: str | Path | None,
    *,
    seed: int | None = None,
    out: str | Path | None = None,
    manifest: str | Path | None = None,
    provider_captions: str | None = None,
    provider_embeddings: str | None = None,
) -> PipelineConfig:
    """Build a run config from a JSON file plus command-line overrides.

    The seed must come from the file or the override; there is no
    clock-derived fallback. Paths in the file resolve relative to the
    file's own directory, and the corpus manifest must exist by the time
    the config is accepted.
    """
    raw: dict = {}
    base = Path(".")
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
        base = path.parent

    known = {"manifest", "seed", "out", "alpha", "dip_reps", "bigrams",
             "providers", "cv", "bt_tol", "bt_max_iters"}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {unknown}")

    if manifest is None:
        manifest = raw.get("manifest")
        if manifest is not None:
            manifest = base / manifest
    if manifest is None:
        raise ConfigError("no corpus manifest: set 'manifest' in the config file")
    manifest = Path(manifest)
    if not manifest.exists():
        raise ConfigError(f"corpus manifest not found: {manifest}")

    if seed is None:
        seed = raw.get("seed")
    if seed is None:
        raise ConfigError(
            "no seed: set 'seed' in the config file or pass --seed "
            "(runs never default to the clock)"
        )
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ConfigError(f"seed must be an integer, got {seed!r}")

    if out is None:
        out = raw.get("out")
        out = base / out if out is not None else Path("runs")
    out = Path(out)

    alpha = float(raw.get("alpha", 0.05))
    if not 0.0 < alpha < 1.0:
        raise ConfigError(f"alpha must be in (0, 1), got {alpha}")
    dip_reps = int(raw.get("dip_reps", 10000))
    if dip_reps < 1:
        raise ConfigError(f"dip_reps must be >= 1, got {dip_reps}")
    bigrams = bool(raw.get("bigrams", False))

    providers = raw.get("providers") or {}
    if not isinstance(providers, dict):
        raise ConfigError("'providers' must be an object")
    if provider_captions is None:
        provider_captions = providers.get("captions")
    if provider_embeddings is None:
        provider_embeddings = providers.get("embeddings")

    cv_raw = raw.get("cv") or {}
    if not isinstance(cv_raw, dict):
        raise ConfigError("'cv' must be an object")
    try:
        cv = replace(CvConfig(), **cv_raw)
    except TypeError as exc:
        raise ConfigError(f"bad 'cv' settings: {exc}") from exc

    return PipelineConfig(
        manifest=manifest,
        seed=int(seed),
        out_dir=out,
        alpha=alpha,
        dip_reps=dip_reps,
        bigrams=bigrams,
        provider_captions=provider_captions,
        provider_embeddings=provider_embeddings,
        cv=cv,
        bt_tol=float(raw.get("bt_tol", 1e-8)),
        bt_max_iters=int(raw.get("bt_max_iters", 10000)),
    )


# --------------------------------------------------------------------------
# Run context
# --------------------------------------------------------------------------

class RunContext:
    """A run directory plus the bookkeeping shared by all stages."""

    def __init__(self, config: PipelineConfig):
        self.config = config
        self.run_dir = config.out_dir / f"run-seed{config.seed}"
        self.run_dir.mkdir(parents=True, exist_ok=True)
        self._hashes: dict[str, str] = {}
        self._corpus: Corpus | None = None
        self._embeddings: dict[str, np.ndarray] | None = None
        existing = self.run_dir / ARTIFACTS["run_manifest"]
        if existing.exists():
            try:
                prior = json.loads(existing.read_text(encoding="utf-8"))
                self._hashes.update(prior.get("files", {}))
            except (json.JSONDecodeError, AttributeError):
                pass

    # ---- shared inputs ----

    def corpus(self) -> Corpus:
        if self._corpus is None:
            self._corpus = load_corpus(self.config.manifest)
        return self._corpus

    def styles(self) -> list[str]:
        return sorted(self.corpus().styles)

    def stimulus_ids(self) -> list[str]:
        return sorted(s.id for s in self.corpus().stimuli)

    def embeddings(self) -> dict[str, np.ndarray]:
        """Caption and response vectors, from the corpus or a provider.

        Caption vectors are keyed by stimulus id and response vectors by
        the text digest. A corpus that ships an embeddings file wins; a
        configured provider endpoint is the fallback; with neither, the
        stages that need vectors fail.
        """
        if self._embeddings is not None:
            return self._embeddings
        corpus = self.corpus()
        from .corpus import load_manifest, manifest_path

        manifest = load_manifest(self.config.manifest)
        emb_path = manifest_path(manifest, "embeddings")
        if emb_path is not None and emb_path.exists():
            self._embeddings = load_embeddings(emb_path, expected_dim=corpus.embedding_dim)
            return self._embeddings
        if self.config.provider_embeddings:
            texts = [s.caption for s in corpus.stimuli if s.caption]
            texts += [r.text for r in corpus.responses]
            fetched = fetch_embeddings(
                texts,
                ProviderConfig(url=self.config.provider_embeddings),
                expected_dim=corpus.embedding_dim,
            )
            vectors: dict[str, np.ndarray] = dict(fetched)
            for s in corpus.stimuli:
                if s.caption:
                    vectors[s.id] = fetched[text_key(s.caption)]
            self.write_json("embeddings_fetched.json", {
                key: [float(v) for v in vec] for key, vec in sorted(vectors.items())
            })
            self._embeddings = vectors
            return self._embeddings
        raise ConfigError(
            "no embedding vectors: the corpus manifest has no 'embeddings' "
            "file and no provider endpoint is configured"
        )

    def stage_seed(self, stage: str) -> int:
        digest = hashlib.sha256(f"{self.config.seed}:{stage}".encode()).digest()
        return int.from_bytes(digest[:8], "big")

    # ---- artifact io ----

    def path(self, key: str) -> Path:
        return self.run_dir / ARTIFACTS[key]

    def register(self, path: Path) -> None:
        rel = str(path.relative_to(self.run_dir))
        self._hashes[rel] = hashlib.sha256(path.read_bytes()).hexdigest()

    def write_bytes(self, name: str, payload: bytes) -> Path:
        path = self.run_dir / name
        path.write_bytes(payload)
        self.register(path)
        return path

    def write_text(self, name: str, text: str) -> Path:
        return self.write_bytes(name, text.encode("utf-8"))

    def write_json(self, name: str, obj) -> Path:
        return self.write_text(name, json.dumps(obj, indent=2, sort_keys=True) + "\n")

    def write_csv(self, name: str, header: list[str], rows: list[list[str]]) -> Path:
        import io

        buf = io.StringIO(newline="")
        w = csv.writer(buf)
        w.writerow(header)
        w.writerows(rows)
        return self.write_text(name, buf.getvalue())

    def require(self, key: str) -> Path:
        path = self.path(key)
        if not path.exists():
            raise MissingStageError(
                f"missing {path.name}; run the '{ARTIFACT_STAGE[key]}' stage first"
            )
        return path

    def write_run_manifest(self) -> None:
        payload = {"seed": self.config.seed, "files": dict(sorted(self._hashes.items()))}
        path = self.path("run_manifest")
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


# --------------------------------------------------------------------------
# Artifact readers (the file side of each stage contract)
# --------------------------------------------------------------------------

def read_bt_scores(path: str | Path) -> dict[str, dict[str, float]]:
    out: dict[str, dict[str, float]] = {}
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            out.setdefault(row["style"], {})[row["stimulus_id"]] = float(row["bt_score"])
    return out


def read_regression_rows(path: str | Path) -> list[dict]:
    rows = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            rows.append({
                "style": row["style"],
                "feature": row["feature"],
                "beta": float(row["beta"]),
                "se": float(row["se"]),
                "t": float(row["t"]),
                "p": float(row["p"]),
                "ci_lo": float(row["ci_lo"]),
                "ci_hi": float(row["ci_hi"]),
            })
    return rows


def read_correlation_csv(path: str | Path) -> tuple[list[str], np.ndarray]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        names = header[1:]
        values = [[float(c) for c in row[1:]] for row in reader]
    return names, np.array(values, dtype=float)


def read_alignment_csv(path: str | Path) -> list[dict]:
    rows = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            rows.append({
                "stimulus_id": row["stimulus_id"],
                "style": row["style"],
                "mean_cosine": float(row["mean_cosine"]),
                "n_responses": int(row["n_responses"]),
            })
    return rows


def read_designer_csv(path: str | Path) -> dict[str, dict[str, float | str | None]]:
    out: dict[str, dict[str, float | str | None]] = {}
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            sid = row["stimulus_id"]
            rec: dict[str, float | str | None] = {}
            for name in BOOLEAN_FEATURES:
                rec[name] = float(row[name]) if row[name] != "" else None
            rec[SPOKE_COUNT_FEATURE] = (
                float(row[SPOKE_COUNT_FEATURE]) if row[SPOKE_COUNT_FEATURE] != "" else None
            )
            rec[SPLIT_TYPE_FEATURE] = row[SPLIT_TYPE_FEATURE] or None
            out[sid] = rec
    return out


# --------------------------------------------------------------------------
# Stages
# --------------------------------------------------------------------------

def stage_validate(ctx: RunContext) -> None:
    corpus = ctx.corpus()
    report = validate_corpus(corpus)
    findings = [{"kind": f.kind, "detail": f.detail} for f in report.findings]
    ctx.write_json(ARTIFACTS["validation"], {
        "ok": report.ok,
        "findings": findings,
        "stats": report.stats,
    })
    fatal = [f for f in report.findings if f.kind in FATAL_FINDING_KINDS]
    for f in report.findings:
        if f not in fatal:
            log.warning("validation: %s: %s", f.kind, f.message)
    if fatal:
        kinds = sorted({f.kind for f in fatal})
        raise StylelabError(
            f"{len(fatal)} blocking validation findings ({', '.join(kinds)}); "
            f"first: {fatal[0].detail}"
        )


def stage_aggregate(ctx: RunContext) -> None:
    corpus = ctx.corpus()
    table = aggregate_annotations(list(corpus.annotations))
    header = ["stimulus_id", *BOOLEAN_FEATURES, SPOKE_COUNT_FEATURE, SPLIT_TYPE_FEATURE]
    rows = []
    for sid in ctx.stimulus_ids():
        rec = table.get(sid, {})
        cells = [sid]
        for name in BOOLEAN_FEATURES:
            cells.append(_fmt(rec.get(name)))
        cells.append(_fmt(rec.get(SPOKE_COUNT_FEATURE)))
        cells.append(rec.get(SPLIT_TYPE_FEATURE) or "")
        rows.append(cells)
    ctx.write_csv(ARTIFACTS["designer"], header, rows)


def stage_extract(ctx: RunContext) -> None:
    corpus = ctx.corpus()
    base = Path(corpus.base_dir)
    paths: dict[str, Path] = {}
    for s in sorted(corpus.stimuli, key=lambda s: s.id):
        p = base / s.image_path
        if not p.exists():
            raise FileNotFoundError(f"stimulus {s.id!r}: image not found: {p}")
        paths[s.id] = p
    features = extract_features_for_images(paths, ctx.config.cv, seed=ctx.stage_seed("extract"))
    write_features_csv(ctx.path("cv"), features)
    ctx.register(ctx.path("cv"))


def stage_fit_bt(ctx: RunContext) -> None:
    corpus = ctx.corpus()
    ids = ctx.stimulus_ids()
    results = fit_per_style(
        list(corpus.judgments),
        ids=ids,
        styles=ctx.styles(),
        tol=ctx.config.bt_tol,
        max_iters=ctx.config.bt_max_iters,
    )
    rows = []
    diagnostics = {}
    for style in ctx.styles():
        res = results[style]
        scores = res.scores()
        for sid in ids:
            rows.append([sid, style, _fmt(scores[sid])])
        desc = bt_descriptives(res.lambdas)
        diagnostics[style] = {
            "converged": res.converged,
            "iterations": res.iterations,
            "max_abs_update_at_exit": res.max_abs_update_at_exit,
            "max_abs_gradient": res.max_abs_gradient,
            "tol": res.tol,
            "descriptives": desc.as_row(),
        }
    ctx.write_csv(ARTIFACTS["bt_scores"], ["stimulus_id", "style", "bt_score"], rows)
    ctx.write_json(ARTIFACTS["bt_diagnostics"], diagnostics)


def _alignment_cells(ctx: RunContext) -> list:
    corpus = ctx.corpus()
    vectors = ctx.embeddings()
    captions = require_caption_vectors(ctx.stimulus_ids(), vectors)
    return alignment_scores(captions, list(corpus.responses), vectors, tuple(ctx.styles()))


def _designer_columns(table: dict[str, dict], ids: list[str]) -> list[tuple[str, np.ndarray]]:
    def cell(sid: str, name: str) -> float:
        v = table.get(sid, {}).get(name)
        return np.nan if v is None else float(v)

    cols: list[tuple[str, np.ndarray]] = []
    for name in BOOLEAN_FEATURES:
        cols.append((name, np.array([cell(sid, name) for sid in ids])))
    cols.append((SPOKE_COUNT_FEATURE,
                 np.array([cell(sid, SPOKE_COUNT_FEATURE) for sid in ids])))
    for cat in SPLIT_TYPE_CATEGORIES[1:]:
        col = []
        for sid in ids:
            v = table.get(sid, {}).get(SPLIT_TYPE_FEATURE)
            col.append(np.nan if v is None else float(v == cat))
        cols.append((f"{SPLIT_TYPE_FEATURE}_{cat}", np.array(col)))
    return cols


def _cv_columns(table: dict[str, dict[str, float | None]], ids: list[str]) -> list[tuple[str, np.ndarray]]:
    cols = []
    for name in FEATURE_COLUMNS:
        cols.append((name, np.array(
            [np.nan if table[sid].get(name) is None else float(table[sid][name]) for sid in ids]
        )))
    return cols


def _fit_family(style: str, columns: list[tuple[str, np.ndarray]], y: np.ndarray,
                alpha: float) -> dict:
    """One regression family for one style, with the data-repair bookkeeping.

    Rows that are NaN in any predictor are excluded listwise, constant
    predictors are dropped, and if the design is still wider than the
    sample can support, trailing predictors are trimmed in their fixed
    declaration order. All three repairs are reported alongside the fit.
    """
    joint = [("__y__", y)] + columns
    complete, n_excluded = listwise_complete(joint)
    y_kept = complete[0][1]
    kept, dropped = drop_zero_variance(complete[1:])
    trimmed: list[str] = []
    n = int(y_kept.shape[0])
    while kept and len(kept) + 1 > n - 1:
        trimmed.append(kept.pop()[0])
    design = design_matrix(kept, add_intercept=True)
    fit = ols_fit(design, y_kept, alpha=alpha, style=style)
    k_pred = fit.k - 1
    if k_pred > 0 and fit.tss > 0:
        if fit.rss <= 0:
            f_overall = {"f": None, "df1": k_pred, "df2": fit.df_resid, "p": 0.0}
        else:
            f = (fit.r_squared / k_pred) / ((1.0 - fit.r_squared) / fit.df_resid)
            f_overall = {
                "f": float(f),
                "df1": k_pred,
                "df2": fit.df_resid,
                "p": f_sf(float(f), k_pred, fit.df_resid),
            }
    else:
        f_overall = None
    return {
        "fit": fit,
        "n": n,
        "excluded_rows": n_excluded,
        "dropped_zero_variance": dropped,
        "trimmed": trimmed,
        "f_overall": f_overall,
    }


def _family_csv_rows(family_by_style: dict[str, dict]) -> list[list[str]]:
    rows = []
    for style in sorted(family_by_style):
        for r in family_by_style[style]["fit"].rows():
            rows.append([
                style, r["term"], _fmt(r["beta"]), _fmt(r["se"]), _fmt(r["t"]),
                _fmt(r["p"]), _fmt(r["ci_low"]), _fmt(r["ci_high"]),
            ])
    return rows


def _family_summary(family_by_style: dict[str, dict]) -> dict:
    out = {}
    for style, fam in family_by_style.items():
        fit = fam["fit"]
        out[style] = {
            "n": fam["n"],
            "k": fit.k,
            "r_squared": fit.r_squared,
            "adj_r_squared": fit.adj_r_squared,
            "excluded_rows": fam["excluded_rows"],
            "dropped_zero_variance": fam["dropped_zero_variance"],
            "trimmed": fam["trimmed"],
            "f_overall": fam["f_overall"],
        }
    return out


def stage_regress(ctx: RunContext) -> None:
    bt = read_bt_scores(ctx.require("bt_scores"))
    # designer aggregation is corpus-derived and cheap, so regress
    # recomputes it rather than depending on the export artifact
    designer_table = aggregate_annotations(list(ctx.corpus().annotations))
    cv_table = read_features_csv(ctx.require("cv"))
    ids = ctx.stimulus_ids()
    align_cells = _alignment_cells(ctx)
    cos_by_style: dict[str, dict[str, float]] = {}
    for cell in align_cells:
        cos_by_style.setdefault(cell.style, {})[cell.stimulus_id] = cell.mean_cosine

    families: dict[str, dict[str, dict]] = {"designer": {}, "cv": {}, "alignment": {}}
    alpha = ctx.config.alpha
    for style in ctx.styles():
        y = np.array([bt[style][sid] for sid in ids])
        families["designer"][style] = _fit_family(
            style, _designer_columns(designer_table, ids), y, alpha)
        families["cv"][style] = _fit_family(
            style, _cv_columns(cv_table, ids), y, alpha)
        cos = np.array([cos_by_style.get(style, {}).get(sid, np.nan) for sid in ids])
        families["alignment"][style] = _fit_family(
            style, [("mean_cosine", cos)], y, alpha)

    header = ["style", "feature", "beta", "se", "t", "p", "ci_lo", "ci_hi"]
    ctx.write_csv(ARTIFACTS["reg_designer"], header, _family_csv_rows(families["designer"]))
    ctx.write_csv(ARTIFACTS["reg_cv"], header, _family_csv_rows(families["cv"]))
    ctx.write_csv(ARTIFACTS["reg_alignment"], header, _family_csv_rows(families["alignment"]))
    ctx.write_json(ARTIFACTS["reg_summary"], {
        family: _family_summary(by_style) for family, by_style in families.items()
    })


def stage_ftest(ctx: RunContext) -> None:
    """Pooled interaction-vs-additive comparison of alignment slopes."""
    bt = read_bt_scores(ctx.require("bt_scores"))
    ids = ctx.stimulus_ids()
    styles = ctx.styles()
    align_cells = _alignment_cells(ctx)
    cos_by_style: dict[str, dict[str, float]] = {}
    for cell in align_cells:
        cos_by_style.setdefault(cell.style, {})[cell.stimulus_id] = cell.mean_cosine

    y_parts, cos_parts, dummy_parts = [], [], {s: [] for s in styles[1:]}
    for style in styles:
        y_parts.append(np.array([bt[style][sid] for sid in ids]))
        cos_parts.append(np.array([cos_by_style[style][sid] for sid in ids]))
        for s in styles[1:]:
            dummy_parts[s].append(np.full(len(ids), float(s == style)))
    y = np.concatenate(y_parts)
    cos = np.concatenate(cos_parts)

    base_cols = [(f"style_{s}", np.concatenate(dummy_parts[s])) for s in styles[1:]]
    base_cols.append(("mean_cosine", cos))
    inter_cols = [
        (f"style_{s}:mean_cosine", np.concatenate(dummy_parts[s]) * cos) for s in styles[1:]
    ]
    restricted = ols_fit(design_matrix(base_cols), y, alpha=ctx.config.alpha)
    full = ols_fit(design_matrix(base_cols + inter_cols), y, alpha=ctx.config.alpha)
    ft = nested_f_test(restricted, full)
    ctx.write_json(ARTIFACTS["f_test"], {
        "comparison": "per-style alignment slopes (interaction) vs one shared slope (additive)",
        "base_style": styles[0],
        "f": ft.f_value,
        "df1": ft.df1,
        "df2": ft.df2,
        "p_value": ft.p_value,
        "rss_restricted": ft.rss_restricted,
        "rss_full": ft.rss_full,
        "slopes_differ_at_alpha": bool(ft.p_value < ctx.config.alpha),
        "alpha": ctx.config.alpha,
    })


def stage_correlate(ctx: RunContext) -> None:
    bt = read_bt_scores(ctx.require("bt_scores"))
    ids = ctx.stimulus_ids()
    cols = [(style, np.array([bt[style][sid] for sid in ids])) for style in ctx.styles()]
    corr = pearson_corr_matrix(cols)
    header = ["style", *corr.names]
    rows = [
        [name, *(_fmt(v) for v in corr.values[i])]
        for i, name in enumerate(corr.names)
    ]
    ctx.write_csv(ARTIFACTS["correlation"], header, rows)


def stage_distributions(ctx: RunContext) -> None:
    bt = read_bt_scores(ctx.require("bt_scores"))
    ids = ctx.stimulus_ids()
    seed = ctx.stage_seed("distributions")
    out = {}
    for style in ctx.styles():
        lam = np.array([bt[style][sid] for sid in ids])
        dip = dip_test(lam, reps=ctx.config.dip_reps, seed=seed)
        sw = shapiro_wilk(lam)
        out[style] = {
            "dip": {
                "statistic": dip.statistic,
                "p_value": dip.p_value,
                "n": dip.n,
                "monte_carlo_reps": dip.monte_carlo_reps,
                "seed": dip.seed,
            },
            "shapiro_wilk": {
                "statistic": sw.statistic,
                "p_value": sw.p_value,
                "n": sw.n,
            },
        }
    ctx.write_json(ARTIFACTS["distributions"], out)


def stage_align(ctx: RunContext) -> None:
    cells = _alignment_cells(ctx)
    rows = [
        [c.stimulus_id, c.style, _fmt(c.mean_cosine), str(c.n_responses)]
        for c in cells
    ]
    ctx.write_csv(
        ARTIFACTS["alignment"],
        ["stimulus_id", "style", "mean_cosine", "n_responses"],
        rows,
    )


def stage_report(ctx: RunContext) -> None:
    from . import report

    report.build_report(ctx)


def stage_figures(ctx: RunContext) -> None:
    from . import figures

    figures.render_all(ctx)


STAGES: tuple[tuple[str, object], ...] = (
    ("validate", stage_validate),
    ("aggregate", stage_aggregate),
    ("extract", stage_extract),
    ("fit-bt", stage_fit_bt),
    ("regress", stage_regress),
    ("ftest", stage_ftest),
    ("correlate", stage_correlate),
    ("distributions", stage_distributions),
    ("align", stage_align),
    ("report", stage_report),
    ("figures", stage_figures),
)

STAGE_NAMES = tuple(name for name, _ in STAGES)
STAGE_FUNCS = dict(STAGES)


def run_stage(ctx: RunContext, name: str) -> None:
    """Run one stage, wrap its failure, and keep the run manifest current."""
    if name not in STAGE_FUNCS:
        raise ConfigError(f"unknown stage {name!r}; stages are {', '.join(STAGE_NAMES)}")
    try:
        STAGE_FUNCS[name](ctx)
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc
    finally:
        ctx.write_run_manifest()


def run_pipeline(ctx: RunContext, stop_after: str | None = None) -> Path:
    """Run all stages in order; returns the run directory.

    A stage failure propagates after the run manifest is brought up to
    date, so everything completed so far stays on disk and accounted for.
    """
    if stop_after is not None and stop_after not in STAGE_FUNCS:
        raise ConfigError(
            f"unknown stage {stop_after!r}; stages are {', '.join(STAGE_NAMES)}"
        )
    for name in STAGE_NAMES:
        log.info("stage %s", name)
        run_stage(ctx, name)
        if name == stop_after:
            break
    return ctx.run_dir
