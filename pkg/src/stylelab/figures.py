"""Figure rendering.

Four figure kinds, all SVG: a coefficient forest per style, the
preference-score distributions, the cross-style correlation heatmap with
numeric cells, and the alignment scatter whose slope annotations are the
same numbers the regression table holds. Output is deterministic: the
Agg backend, a seed-derived svg hashsalt so element ids are stable, and
no date metadata.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .pipeline import (
    read_alignment_csv,
    read_bt_scores,
    read_correlation_csv,
    read_regression_rows,
)

SIGNIFICANT_COLOR = "#1f6fb2"
NONSIG_COLOR = "#9aa0a6"


def _finish(fig, ctx, name: str) -> str:
    path = ctx.run_dir / name
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    ctx.register(path)
    return name


def _forest(ctx, style: str, rows: list[dict], alpha: float) -> str:
    terms = [r for r in rows if r["style"] == style and r["feature"] != "intercept"]
    names = [r["feature"] for r in terms]
    beta = np.array([r["beta"] for r in terms])
    lo = np.array([r["ci_lo"] for r in terms])
    hi = np.array([r["ci_hi"] for r in terms])
    sig = [r["p"] < alpha for r in terms]

    fig, ax = plt.subplots(figsize=(6.5, 0.45 * max(4, len(terms)) + 1.2))
    ypos = np.arange(len(terms))[::-1]
    for y, b, l, h, s in zip(ypos, beta, lo, hi, sig):
        color = SIGNIFICANT_COLOR if s else NONSIG_COLOR
        ax.plot([l, h], [y, y], color=color, lw=2, solid_capstyle="butt")
        ax.plot([b], [y], "o", color=color, ms=6)
    ax.axvline(0.0, color="#444444", lw=1, ls="--")
    ax.set_yticks(ypos)
    ax.set_yticklabels(names, fontsize=8)
    ax.set_xlabel("coefficient (95% CI)")
    ax.set_title(f"{style}: designer-feature effects on preference")
    fig.tight_layout()
    return _finish(fig, ctx, f"forest_{style}.svg")


def _bt_distributions(ctx, bt: dict[str, dict[str, float]]) -> str:
    styles = sorted(bt)
    data = [np.array(sorted(bt[s].values())) for s in styles]
    fig, ax = plt.subplots(figsize=(1.6 * max(4, len(styles)), 4.2))
    parts = ax.violinplot(data, showextrema=False, widths=0.8)
    for body in parts["bodies"]:
        body.set_facecolor("#c3d7ea")
        body.set_alpha(0.9)
    ax.boxplot(data, widths=0.18, medianprops={"color": "#1f6fb2"},
               flierprops={"markersize": 3})
    ax.set_xticks(range(1, len(styles) + 1))
    ax.set_xticklabels(styles, rotation=30, ha="right", fontsize=8)
    ax.axhline(0.0, color="#444444", lw=0.8, ls=":")
    ax.set_ylabel("preference score")
    ax.set_title("Preference score distributions by style")
    fig.tight_layout()
    return _finish(fig, ctx, "bt_distributions.svg")


def _heatmap(ctx, names: list[str], values: np.ndarray) -> str:
    n = len(names)
    fig, ax = plt.subplots(figsize=(1.0 * max(4, n) + 1.5, 1.0 * max(4, n)))
    im = ax.imshow(values, vmin=-1.0, vmax=1.0, cmap="RdBu_r")
    ax.set_xticks(range(n))
    ax.set_yticks(range(n))
    ax.set_xticklabels(names, rotation=45, ha="right", fontsize=8)
    ax.set_yticklabels(names, fontsize=8)
    for i in range(n):
        for j in range(n):
            v = values[i, j]
            ax.text(j, i, f"{v:.2f}", ha="center", va="center", fontsize=8,
                    color="white" if abs(v) > 0.6 else "black")
    fig.colorbar(im, ax=ax, shrink=0.85)
    ax.set_title("Cross-style preference correlations")
    fig.tight_layout()
    return _finish(fig, ctx, "correlation_heatmap.svg")


def _alignment_scatter(ctx, alignment: list[dict], bt: dict[str, dict[str, float]],
                       reg_rows: list[dict]) -> str:
    styles = sorted(bt)
    coef = {}
    for r in reg_rows:
        coef.setdefault(r["style"], {})[r["feature"]] = r["beta"]
    cells = {(a["style"], a["stimulus_id"]): a["mean_cosine"] for a in alignment}

    fig, axes = plt.subplots(1, len(styles), figsize=(3.4 * len(styles), 3.4),
                             squeeze=False)
    for ax, style in zip(axes[0], styles):
        ids = sorted(bt[style])
        xy = [(cells[(style, sid)], bt[style][sid]) for sid in ids
              if (style, sid) in cells]
        x = np.array([p[0] for p in xy])
        y = np.array([p[1] for p in xy])
        ax.plot(x, y, "o", ms=5, color="#1f6fb2", alpha=0.8)
        slope = coef.get(style, {}).get("mean_cosine")
        intercept = coef.get(style, {}).get("intercept", 0.0)
        if slope is not None and x.size:
            xs = np.linspace(float(x.min()), float(x.max()), 50)
            ax.plot(xs, intercept + slope * xs, color="#d2691e", lw=1.6)
            ax.annotate(f"beta = {slope:.3f}", xy=(0.05, 0.92),
                        xycoords="axes fraction", fontsize=9)
        ax.set_title(style, fontsize=10)
        ax.set_xlabel("mean caption-response cosine")
    axes[0][0].set_ylabel("preference score")
    fig.suptitle("Alignment vs preference", y=1.02)
    fig.tight_layout()
    return _finish(fig, ctx, "alignment_scatter.svg")


def render_all(ctx) -> list[str]:
    """Render every figure from the run's persisted artifacts."""
    plt.rcParams["svg.hashsalt"] = str(ctx.config.seed)
    bt = read_bt_scores(ctx.require("bt_scores"))
    designer_rows = read_regression_rows(ctx.require("reg_designer"))
    alignment_rows = read_regression_rows(ctx.require("reg_alignment"))
    corr_names, corr_values = read_correlation_csv(ctx.require("correlation"))
    alignment = read_alignment_csv(ctx.require("alignment"))

    out = []
    for style in sorted(bt):
        out.append(_forest(ctx, style, designer_rows, ctx.config.alpha))
    out.append(_bt_distributions(ctx, bt))
    out.append(_heatmap(ctx, corr_names, corr_values))
    out.append(_alignment_scatter(ctx, alignment, bt, alignment_rows))
    return out
