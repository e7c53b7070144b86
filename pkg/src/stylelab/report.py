"""Report assembly.

Turns the artifacts a run has persisted into report.json (machine
readable, full precision) and summary.txt (human readable). Also home
to the response-text bigram counter, which feeds optional per-style
bigram tables.
"""

from __future__ import annotations

import json
import re
from collections import Counter

from .corpus import ResponseText
from .errors import NoResponsesError

# small bundled stop-word list; a bigram is dropped only when BOTH words
# are on it, so "the rim" survives while "of the" does not
STOP_WORDS = frozenset("""
a about above after again all am an and any are as at be because been
before being below between both but by could did do does doing down
during each few for from further had has have having he her here hers
him his how i if in into is it its itself just me more most my no nor
not now of off on once only or other our ours out over own same she so
some such than that the their theirs them then there these they this
those through to too under until up very was we were what when where
which while who whom why will with you your yours
""".split())

_TOKEN = re.compile(r"[a-z0-9]+")


def bigram_frequencies(responses: list[ResponseText], style: str) -> list[tuple[str, int]]:
    """Adjacent word pairs in a style's responses, most frequent first.

    Text is lowercased and punctuation-stripped before pairing; pairs of
    two stop words are dropped; ties in count order lexicographically.
    Every occurrence counts, so a duplicated response doubles its pairs.
    """
    texts = [r.text for r in responses if r.style == style]
    if not texts:
        raise NoResponsesError(f"no responses for style {style!r}")
    counts: Counter[str] = Counter()
    for text in texts:
        tokens = _TOKEN.findall(text.lower())
        for a, b in zip(tokens, tokens[1:]):
            if a in STOP_WORDS and b in STOP_WORDS:
                continue
            counts[f"{a} {b}"] += 1
    return sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))


# --------------------------------------------------------------------------
# Report building
# --------------------------------------------------------------------------

def _significant_terms(rows: list[dict], style: str, alpha: float) -> list[dict]:
    out = []
    for r in rows:
        if r["style"] == style and r["feature"] != "intercept" and r["p"] < alpha:
            out.append(r)
    out.sort(key=lambda r: (r["p"], r["feature"]))
    return out


def _sig_line(terms: list[dict]) -> str:
    if not terms:
        return "none at p<.05"
    return ", ".join(
        f"{r['feature']} (beta={r['beta']:.3f}, p={r['p']:.4f})" for r in terms
    )


def build_report(ctx) -> None:
    """Assemble report.json and summary.txt from a run's artifacts."""
    from .pipeline import (
        read_alignment_csv,
        read_bt_scores,
        read_correlation_csv,
        read_regression_rows,
    )

    validation = json.loads(ctx.require("validation").read_text(encoding="utf-8"))
    bt = read_bt_scores(ctx.require("bt_scores"))
    diagnostics = json.loads(ctx.require("bt_diagnostics").read_text(encoding="utf-8"))
    reg_rows = {
        "designer": read_regression_rows(ctx.require("reg_designer")),
        "cv": read_regression_rows(ctx.require("reg_cv")),
        "alignment": read_regression_rows(ctx.require("reg_alignment")),
    }
    reg_summary = json.loads(ctx.require("reg_summary").read_text(encoding="utf-8"))
    f_test = json.loads(ctx.require("f_test").read_text(encoding="utf-8"))
    corr_names, corr_values = read_correlation_csv(ctx.require("correlation"))
    distributions = json.loads(ctx.require("distributions").read_text(encoding="utf-8"))
    alignment = read_alignment_csv(ctx.require("alignment"))

    alpha = ctx.config.alpha
    stats = validation["stats"]
    styles = sorted(bt)
    n_stimuli = stats["n_stimuli"]

    per_style = {}
    lines: list[str] = []
    lines.append("Consumer aesthetic perception report")
    lines.append(f"seed: {ctx.config.seed}")
    lines.append("")
    lines.append(
        f"Corpus: {n_stimuli} stimuli, {len(styles)} styles, "
        f"{stats['n_judgments']} pairwise judgments, "
        f"{stats['n_annotations']} annotation records, "
        f"{stats['n_responses']} free-text responses."
    )
    lines.append(
        f"Each judged pair received an average of {stats['mean_ratings_per_pair']} ratings."
    )
    if not validation["ok"]:
        lines.append(f"Validation recorded {len(validation['findings'])} findings; see validation.json.")
    lines.append("")

    n_align = {(a["style"], a["stimulus_id"]): a for a in alignment}
    for style in styles:
        scores = bt[style]
        top_k = min(5, n_stimuli)
        top = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))[:top_k]
        diag = diagnostics[style]
        dist = distributions[style]
        sig = {
            family: _significant_terms(rows, style, alpha)
            for family, rows in reg_rows.items()
        }
        per_style[style] = {
            "top": [{"stimulus_id": sid, "bt_score": s} for sid, s in top],
            "significant": {
                family: [
                    {"feature": r["feature"], "beta": r["beta"], "p": r["p"]}
                    for r in terms
                ]
                for family, terms in sig.items()
            },
            "bt": {
                "converged": diag["converged"],
                "iterations": diag["iterations"],
                "descriptives": diag["descriptives"],
            },
            "dip": dist["dip"],
            "shapiro_wilk": dist["shapiro_wilk"],
            "regression": {
                family: reg_summary[family][style] for family in reg_rows
            },
        }

        lines.append(f"== {style} ==")
        conv = "converged" if diag["converged"] else "did NOT converge"
        lines.append(
            f"Preference scores {conv} in {diag['iterations']} iterations "
            f"(mean {diag['descriptives']['mean']:.4f}, sd {diag['descriptives']['std']:.4f})."
        )
        lines.append(f"Top {top_k} wheels by preference score:")
        for rank, (sid, s) in enumerate(top, start=1):
            lines.append(f"  {rank}. {sid}  {s:.4f}")
        for family, label in (
            ("designer", "Designer-feature model"),
            ("cv", "Visual-feature model"),
            ("alignment", "Alignment model"),
        ):
            summ = reg_summary[family][style]
            lines.append(
                f"{label}: R^2={summ['r_squared']:.3f}, adj={summ['adj_r_squared']:.3f}, "
                f"n={summ['n']}."
            )
            lines.append(f"  significant at p<.05: {_sig_line(sig[family])}")
            if summ["excluded_rows"]:
                lines.append(
                    f"  {summ['excluded_rows']} rows excluded for missing values."
                )
            if summ["dropped_zero_variance"]:
                lines.append(
                    "  dropped zero-variance predictors: "
                    + ", ".join(summ["dropped_zero_variance"])
                )
            if summ["trimmed"]:
                lines.append(
                    "  trimmed to fit the sample size: " + ", ".join(summ["trimmed"])
                )
        dip_p = dist["dip"]["p_value"]
        sw_p = dist["shapiro_wilk"]["p_value"]
        dip_note = "multimodal" if dip_p < alpha else "no evidence against unimodality"
        lines.append(
            f"Score distribution: dip p={dip_p:.4f} ({dip_note}); "
            f"Shapiro-Wilk p={sw_p:.4f}."
        )
        lines.append("")

    lines.append("== Pooled comparison ==")
    lines.append(
        f"Interaction vs additive alignment model: "
        f"F({f_test['df1']}, {f_test['df2']}) = {f_test['f']:.4f}, p = {f_test['p_value']:.6f}."
    )
    if f_test["slopes_differ_at_alpha"]:
        lines.append("Per-style alignment slopes differ at p<.05.")
    else:
        lines.append("No evidence at p<.05 that alignment slopes differ across styles.")
    lines.append("")

    lines.append("== Cross-style score correlations ==")
    width = max(len(n) for n in corr_names)
    lines.append(" " * (width + 2) + "  ".join(f"{n:>{width}}" for n in corr_names))
    for i, name in enumerate(corr_names):
        cells = "  ".join(f"{corr_values[i][j]:>{width}.2f}" for j in range(len(corr_names)))
        lines.append(f"{name:>{width}}  {cells}")
    lines.append("")

    bigram_files = []
    if ctx.config.bigrams:
        corpus = ctx.corpus()
        for style in styles:
            if not any(r.style == style for r in corpus.responses):
                continue
            pairs = bigram_frequencies(list(corpus.responses), style)
            rows = [[bg, str(c)] for bg, c in pairs]
            name = f"bigrams_{style}.csv"
            ctx.write_csv(name, ["bigram", "count"], rows)
            bigram_files.append(name)
        if bigram_files:
            lines.append("Bigram tables: " + ", ".join(bigram_files))
            lines.append("")

    payload = {
        "seed": ctx.config.seed,
        "alpha": alpha,
        "corpus": stats,
        "styles": per_style,
        "f_test": f_test,
        "correlation": {
            "names": corr_names,
            "values": [[float(v) for v in row] for row in corr_values],
        },
        "bigram_files": bigram_files,
    }
    ctx.write_json("report.json", payload)
    ctx.write_text("summary.txt", "\n".join(lines) + "\n")
