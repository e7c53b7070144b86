"""Stimulus subsampling: exact t-SNE, seeded k-means, and the
closest-to-centroid representative picker built on both.

The t-SNE here is the exact O(n^2) formulation: per-point bandwidths are
binary-searched to the target perplexity, early exaggeration multiplies
P for the first 250 iterations, and plain momentum gradient descent runs
for a fixed iteration budget while logging KL divergence checkpoints.

k-means canonicalizes its input order before doing any seeded work, so
permuting the rows of X changes nothing about the fitted centroids or
which cluster a given point lands in.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatchError,
    EmptyInputError,
    KTooLargeError,
    MTooLargeError,
    NonFiniteValueError,
    TooFewPointsError,
)

log = logging.getLogger(__name__)


# --------------------------------------------------------------------------
# Exact t-SNE
# --------------------------------------------------------------------------

def _squared_distances(X: np.ndarray) -> np.ndarray:
    sq = np.sum(X * X, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (X @ X.T)
    np.fill_diagonal(d2, 0.0)
    return np.maximum(d2, 0.0)


def _conditional_probs(d2_row: np.ndarray, beta: float) -> tuple[np.ndarray, float]:
    """Row of conditional probabilities and its Shannon entropy (nats)."""
    p = np.exp(-d2_row * beta)
    total = p.sum()
    if total <= 0.0:
        return np.zeros_like(p), 0.0
    p = p / total
    nonzero = p > 0
    h = -float(np.sum(p[nonzero] * np.log(p[nonzero])))
    return p, h


def joint_probabilities(
    X: np.ndarray, perplexity: float, entropy_tol: float = 1e-5, max_steps: int = 100
) -> np.ndarray:
    """Symmetrized t-SNE input probabilities P.

    Each point's Gaussian precision is binary-searched until the entropy
    of its conditional distribution matches log(perplexity) within
    `entropy_tol`, then P = (P_cond + P_cond^T) / (2n).
    """
    n = X.shape[0]
    d2 = _squared_distances(X)
    target = np.log(perplexity)
    cond = np.zeros((n, n))
    for i in range(n):
        row = np.delete(d2[i], i)
        beta, beta_lo, beta_hi = 1.0, 0.0, np.inf
        p, h = _conditional_probs(row, beta)
        for _ in range(max_steps):
            if abs(h - target) <= entropy_tol:
                break
            if h > target:
                beta_lo = beta
                beta = beta * 2.0 if beta_hi == np.inf else 0.5 * (beta_lo + beta_hi)
            else:
                beta_hi = beta
                beta = 0.5 * (beta_lo + beta_hi)
            p, h = _conditional_probs(row, beta)
        cond[i, np.arange(n) != i] = p
    joint = (cond + cond.T) / (2.0 * n)
    return np.maximum(joint, 1e-12)


def _q_matrix(Y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Student-t low-dimensional affinities Q and the raw kernel."""
    num = 1.0 / (1.0 + _squared_distances(Y))
    np.fill_diagonal(num, 0.0)
    q = num / num.sum()
    return np.maximum(q, 1e-12), num


def kl_divergence(P: np.ndarray, Y: np.ndarray) -> float:
    q, _ = _q_matrix(Y)
    return float(np.sum(P * np.log(P / q)))


def tsne_gradient(P: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Gradient of KL(P || Q) with respect to the embedding Y.

    grad_i = 4 sum_j (p_ij - q_ij) (1 + |y_i - y_j|^2)^-1 (y_i - y_j),
    expressed as matrix products instead of a per-point loop.
    """
    q, num = _q_matrix(Y)
    pq = (P - q) * num
    row_sums = pq.sum(axis=1)
    return 4.0 * (row_sums[:, None] * Y - pq @ Y)


@dataclass(frozen=True)
class EmbeddedPoint:
    """A stimulus placed in the 2-d map."""

    id: str
    x: float
    y: float

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])


@dataclass(frozen=True)
class TSNEResult:
    ids: tuple[str, ...]
    embedding: np.ndarray
    kl_history: tuple[tuple[int, float], ...]
    perplexity: float
    n_iters: int
    seed: int

    @property
    def final_kl(self) -> float:
        return self.kl_history[-1][1]

    def points(self) -> list[EmbeddedPoint]:
        return [
            EmbeddedPoint(id=sid, x=float(row[0]), y=float(row[1]))
            for sid, row in zip(self.ids, self.embedding)
        ]


def tsne_embed(
    vectors: dict[str, np.ndarray],
    perplexity: float = 30.0,
    n_components: int = 2,
    n_iters: int = 1000,
    learning_rate: float = 200.0,
    early_exaggeration: float = 12.0,
    exaggeration_iters: int = 250,
    seed: int = 0,
) -> TSNEResult:
    """Exact t-SNE over a map of id -> high-dimensional vector.

    Rows are processed in sorted-id order so the result depends only on
    the map contents, not insertion order. KL divergence (of the
    unexaggerated P) is recorded every 100 iterations. Momentum steps
    from 0.5 to 0.8 once exaggeration ends.
    """
    if not vectors:
        raise EmptyInputError("no vectors to embed")
    ids = tuple(sorted(vectors))
    X = np.asarray([np.asarray(vectors[sid], dtype=float) for sid in ids])
    if X.ndim != 2:
        raise DimensionMismatchError("vectors must share one dimensionality")
    n = X.shape[0]
    if n < 5:
        raise TooFewPointsError(f"t-SNE needs at least 5 points, got {n}")
    if not np.all(np.isfinite(X)):
        raise NonFiniteValueError("t-SNE input must be finite")
    if n < 3 * perplexity:
        log.warning("only %d points for perplexity %.1f; results may be unstable", n, perplexity)

    P = joint_probabilities(X, perplexity)
    rng = np.random.default_rng(seed)
    Y = rng.normal(0.0, 1e-4, size=(n, n_components))
    Y_prev = Y.copy()
    history: list[tuple[int, float]] = []

    for it in range(1, n_iters + 1):
        exaggerating = it <= exaggeration_iters
        momentum = 0.5 if exaggerating else 0.8
        P_eff = P * early_exaggeration if exaggerating else P
        grad = tsne_gradient(P_eff, Y)
        Y_new = Y - learning_rate * grad + momentum * (Y - Y_prev)
        Y_prev, Y = Y, Y_new
        if it % 100 == 0:
            history.append((it, kl_divergence(P, Y)))

    return TSNEResult(
        ids=ids,
        embedding=Y,
        kl_history=tuple(history),
        perplexity=float(perplexity),
        n_iters=n_iters,
        seed=seed,
    )


# --------------------------------------------------------------------------
# k-means
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class KMeansResult:
    centroids: np.ndarray
    assignments: np.ndarray
    inertia: float
    n_iters: int
    seed: int


def _canonical_order(X: np.ndarray) -> np.ndarray:
    """Indices that sort rows lexicographically (first column primary)."""
    return np.lexsort(tuple(X[:, c] for c in range(X.shape[1] - 1, -1, -1)))


def _kmeans_plus_plus(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centroids = np.empty((k, X.shape[1]))
    centroids[0] = X[rng.integers(n)]
    d2 = np.sum((X - centroids[0]) ** 2, axis=1)
    for c in range(1, k):
        total = d2.sum()
        if total == 0.0:
            centroids[c] = X[rng.integers(n)]
            continue
        centroids[c] = X[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, np.sum((X - centroids[c]) ** 2, axis=1))
    return centroids


def _lloyd(X: np.ndarray, centroids: np.ndarray, max_iters: int) -> tuple[np.ndarray, np.ndarray, float, int]:
    n, k = X.shape[0], centroids.shape[0]
    prev_inertia = np.inf
    prev_assignments = None
    assignments = np.zeros(n, dtype=int)
    it = 0
    for it in range(1, max_iters + 1):
        d2 = np.sum((X[:, None, :] - centroids[None, :, :]) ** 2, axis=2)
        assignments = np.argmin(d2, axis=1)
        own_dist = d2[np.arange(n), assignments].copy()
        inertia = float(own_dist.sum())

        reseeded = False
        for c in range(k):
            if not np.any(assignments == c):
                # revive an empty cluster with the current worst-fit point
                worst = int(np.argmax(own_dist))
                centroids[c] = X[worst]
                assignments[worst] = c
                own_dist[worst] = 0.0
                reseeded = True
        for c in range(k):
            members = assignments == c
            if members.any():
                centroids[c] = X[members].mean(axis=0)
        if not reseeded:
            assert inertia <= prev_inertia + 1e-9, "inertia increased during Lloyd iteration"
        if prev_assignments is not None and np.array_equal(assignments, prev_assignments):
            break
        prev_inertia = inertia
        prev_assignments = assignments.copy()
    d2 = np.sum((X[:, None, :] - centroids[None, :, :]) ** 2, axis=2)
    assignments = np.argmin(d2, axis=1)
    inertia = float(d2[np.arange(n), assignments].sum())
    return centroids, assignments, inertia, it


def kmeans(
    X: np.ndarray,
    k: int,
    seed: int = 0,
    restarts: int = 8,
    max_iters: int = 300,
) -> KMeansResult:
    """Seeded k-means++ with Lloyd refinement and restart selection.

    Rows are canonicalized (sorted lexicographically) before any seeded
    choice is made, so the result is invariant to input row order; the
    returned assignments are mapped back to the caller's order. Accepts
    either an array of rows or a list of EmbeddedPoint.
    """
    if isinstance(X, (list, tuple)) and X and isinstance(X[0], EmbeddedPoint):
        X = np.asarray([[p.x, p.y] for p in X], dtype=float)
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyInputError("k-means expects a non-empty 2-d array")
    if not np.all(np.isfinite(X)):
        raise NonFiniteValueError("k-means input must be finite")
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > X.shape[0]:
        raise KTooLargeError(f"k={k} exceeds the {X.shape[0]} available points")

    order = _canonical_order(X)
    Xc = X[order]
    root = np.random.default_rng(seed)
    child_seeds = root.integers(0, 2**63 - 1, size=restarts)

    best: tuple[float, np.ndarray, np.ndarray, int] | None = None
    for child in child_seeds:
        rng = np.random.default_rng(int(child))
        init = _kmeans_plus_plus(Xc, k, rng)
        centroids, assignments, inertia, iters = _lloyd(Xc, init.copy(), max_iters)
        if best is None or inertia < best[0]:
            best = (inertia, centroids, assignments, iters)

    inertia, centroids, canon_assignments, iters = best
    assignments = np.empty(X.shape[0], dtype=int)
    assignments[order] = canon_assignments
    return KMeansResult(
        centroids=centroids,
        assignments=assignments,
        inertia=inertia,
        n_iters=iters,
        seed=seed,
    )


# --------------------------------------------------------------------------
# Representative selection
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SelectionResult:
    selected_ids: tuple[str, ...]
    assignments: dict[str, int]
    distances: dict[str, float]
    clustering: KMeansResult


def select_representatives(
    points: list[EmbeddedPoint],
    clustering: KMeansResult,
    m: int,
    mode: str = "global",
) -> SelectionResult:
    """Pick m representatives from already-clustered points.

    `clustering` must come from a k-means fit over these points in this
    order. Points are ranked by distance to their own centroid (ties
    broken by id). In "global" mode the best m overall are taken, topped
    up so each non-empty cluster keeps at least one pick whenever m
    allows it. In "per_cluster" mode each cluster gets a quota
    proportional to its size (largest remainder), which forces a more
    even spread.
    """
    ids = [p.id for p in points]
    X = np.asarray([[p.x, p.y] for p in points], dtype=float)
    if len(ids) != clustering.assignments.shape[0]:
        raise DimensionMismatchError(
            f"{len(ids)} points but clustering assigned {clustering.assignments.shape[0]}"
        )
    if len(set(ids)) != len(ids):
        raise ValueError("ids must be unique")
    if m > len(ids):
        raise MTooLargeError(f"cannot select {m} of {len(ids)} points")
    if mode not in ("global", "per_cluster"):
        raise ValueError(f"unknown selection mode {mode!r}")

    km = clustering
    diffs = X - km.centroids[km.assignments]
    dist = np.sqrt(np.sum(diffs * diffs, axis=1))
    table = sorted(
        (float(dist[i]), ids[i], int(km.assignments[i])) for i in range(len(ids))
    )

    clusters = sorted({c for _, _, c in table})
    chosen: list[str] = []
    if mode == "global":
        taken: set[str] = set()
        if m >= len(clusters):
            for c in clusters:
                best_id = next(sid for _, sid, cc in table if cc == c)
                taken.add(best_id)
            chosen.extend(sorted(taken))
        for _, sid, _ in table:
            if len(chosen) >= m:
                break
            if sid not in taken:
                chosen.append(sid)
                taken.add(sid)
        chosen = chosen[:m]
    else:
        sizes = {c: sum(1 for _, _, cc in table if cc == c) for c in clusters}
        n = len(ids)
        quotas = {c: min(sizes[c], (m * sizes[c]) // n) for c in clusters}
        remainders = sorted(
            clusters,
            key=lambda c: (-(m * sizes[c] % n), c),
        )
        spare = m - sum(quotas.values())
        idx = 0
        while spare > 0 and idx < 10 * len(clusters):
            c = remainders[idx % len(clusters)]
            if quotas[c] < sizes[c]:
                quotas[c] += 1
                spare -= 1
            idx += 1
        for c in clusters:
            members = [sid for _, sid, cc in table if cc == c]
            chosen.extend(members[:quotas[c]])

    return SelectionResult(
        selected_ids=tuple(sorted(chosen)),
        assignments={ids[i]: int(km.assignments[i]) for i in range(len(ids))},
        distances={ids[i]: float(dist[i]) for i in range(len(ids))},
        clustering=km,
    )
