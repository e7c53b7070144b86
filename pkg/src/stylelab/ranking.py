"""Bradley-Terry ranking from pairwise style judgments.

Scores are fit by maximum likelihood with the classic minorize-maximize
update (Zermelo's iteration): with W_i the total wins of item i and
n_ij the number of comparisons between i and j,

    pi_i  <-  W_i / sum_j n_ij / (pi_i + pi_j)

The reported scale is lambda = log(pi), recentred so the lambdas of each
fit average to exactly zero. At a true maximum the likelihood gradient

    g_i = W_i - sum_j n_ij * sigmoid(lambda_i - lambda_j)

vanishes; `BTResult.max_abs_gradient` records how close the fit got.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .corpus import Judgment
from .errors import (
    DegenerateItemError,
    DisconnectedGraphError,
    DuplicateIdError,
    EmptyInputError,
    UnknownStimulusError,
)


@dataclass(frozen=True)
class WinMatrix:
    """Directed win counts: wins[i, j] = times item i beat item j."""

    ids: tuple[str, ...]
    wins: np.ndarray

    def __post_init__(self):
        n = len(self.ids)
        if self.wins.shape != (n, n):
            raise ValueError(f"wins must be {n}x{n}, got {self.wins.shape}")

    @property
    def n_items(self) -> int:
        return len(self.ids)

    def comparisons(self) -> np.ndarray:
        """n_ij = wins[i, j] + wins[j, i]."""
        return self.wins + self.wins.T


def win_matrix_from_judgments(judgments: list[Judgment], ids: list[str]) -> WinMatrix:
    if not judgments:
        raise EmptyInputError("no judgments to tally")
    if len(set(ids)) != len(ids):
        raise DuplicateIdError("duplicate ids in item list")
    index = {sid: k for k, sid in enumerate(ids)}
    wins = np.zeros((len(ids), len(ids)), dtype=float)
    for j in judgments:
        try:
            wi, li = index[j.winner_id], index[j.loser_id]
        except KeyError as exc:
            raise UnknownStimulusError(f"judgment references unknown id {exc.args[0]!r}") from None
        wins[wi, li] += 1.0
    return WinMatrix(ids=tuple(ids), wins=wins)


def check_connectivity(matrix: WinMatrix) -> list[list[str]]:
    """Connected components of the undirected comparison graph.

    Items belong to one component when a chain of compared pairs links
    them. A single component is required for a Bradley-Terry fit.
    """
    n = matrix.n_items
    compared = matrix.comparisons() > 0
    seen = [False] * n
    components = []
    for start in range(n):
        if seen[start]:
            continue
        stack, members = [start], []
        seen[start] = True
        while stack:
            u = stack.pop()
            members.append(u)
            for v in np.nonzero(compared[u])[0]:
                if not seen[v]:
                    seen[v] = True
                    stack.append(int(v))
        components.append([matrix.ids[k] for k in sorted(members)])
    return components


@dataclass(frozen=True)
class BTResult:
    ids: tuple[str, ...]
    lambdas: np.ndarray
    converged: bool
    iterations: int
    max_abs_update_at_exit: float
    max_abs_gradient: float
    tol: float
    style: str | None = None

    def scores(self) -> dict[str, float]:
        return {sid: float(lam) for sid, lam in zip(self.ids, self.lambdas)}


_GRADIENT_TOL = 1e-6


def fit_bradley_terry(
    matrix: WinMatrix,
    tol: float = 1e-8,
    max_iters: int = 10000,
    pseudo_count: float = 0.0,
) -> BTResult:
    """Fit Bradley-Terry log-strengths by MM iteration.

    Convergence requires both a maximum log-strength update below `tol`
    and a likelihood gradient with max absolute entry at most 1e-6.

    `pseudo_count` is added to both directed cells of every compared pair,
    which regularizes items that never won or never lost. With the default
    of zero such items have no finite MLE and raise DegenerateItemError.

    Raises DisconnectedGraphError when the comparison graph does not link
    all items. Failure to reach `tol` within `max_iters` is reported through
    `BTResult.converged`, not an exception.
    """
    components = check_connectivity(matrix)
    if len(components) > 1:
        raise DisconnectedGraphError(
            f"comparison graph has {len(components)} components; "
            f"smallest is {min(components, key=len)}"
        )

    wins = matrix.wins.astype(float).copy()
    if pseudo_count > 0.0:
        compared = matrix.comparisons() > 0
        wins[compared] += pseudo_count

    total_wins = wins.sum(axis=1)
    total_losses = wins.sum(axis=0)
    if pseudo_count == 0.0:
        for k in range(matrix.n_items):
            if total_wins[k] == 0.0:
                raise DegenerateItemError(f"item {matrix.ids[k]!r} never won a comparison")
            if total_losses[k] == 0.0:
                raise DegenerateItemError(f"item {matrix.ids[k]!r} never lost a comparison")

    n_ij = wins + wins.T
    pi = np.ones(matrix.n_items, dtype=float)
    converged = False
    iterations = 0
    delta = math.inf
    for iterations in range(1, max_iters + 1):
        denom = (n_ij / (pi[:, None] + pi[None, :] + np.eye(matrix.n_items))).sum(axis=1)
        # The eye term only pads the diagonal, where n_ij is zero anyway.
        pi_new = total_wins / denom
        pi_new /= np.exp(np.mean(np.log(pi_new)))
        delta = float(np.max(np.abs(np.log(pi_new) - np.log(pi))))
        pi = pi_new
        if delta < tol:
            # small MM steps do not by themselves bound the gradient, so
            # declare convergence only once the score equations balance too
            lam = np.log(pi)
            grad = total_wins - (n_ij * _sigmoid(lam[:, None] - lam[None, :])).sum(axis=1)
            if float(np.max(np.abs(grad))) <= _GRADIENT_TOL:
                converged = True
                break

    lambdas = np.log(pi)
    lambdas = lambdas - lambdas.mean()
    grad = total_wins - (n_ij * _sigmoid(lambdas[:, None] - lambdas[None, :])).sum(axis=1)
    return BTResult(
        ids=matrix.ids,
        lambdas=lambdas,
        converged=converged,
        iterations=iterations,
        max_abs_update_at_exit=delta,
        max_abs_gradient=float(np.max(np.abs(grad))),
        tol=tol,
    )


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x, dtype=float)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass(frozen=True)
class DescriptiveStats:
    """Summary of a score vector; `degenerate` flags a single-item input,
    whose sample std is undefined and reported as 0."""

    n: int
    mean: float
    std: float
    minimum: float
    q25: float
    median: float
    q75: float
    maximum: float
    value_range: float
    degenerate: bool = False

    def as_row(self) -> dict[str, float]:
        return {
            "mean": self.mean,
            "std": self.std,
            "min": self.minimum,
            "q25": self.q25,
            "median": self.median,
            "q75": self.q75,
            "max": self.maximum,
            "range": self.value_range,
        }


def bt_descriptives(lambdas: np.ndarray) -> DescriptiveStats:
    """Mean, sample std (n-1 denominator), min, quartiles, max and range.

    Quartiles use linear interpolation between order statistics.
    """
    arr = np.asarray(lambdas, dtype=float)
    if arr.size == 0:
        raise EmptyInputError("no scores to describe")
    degenerate = arr.size == 1
    std = 0.0 if degenerate else float(np.std(arr, ddof=1))
    q25, median, q75 = (float(q) for q in np.percentile(arr, [25.0, 50.0, 75.0]))
    return DescriptiveStats(
        n=int(arr.size),
        mean=float(arr.mean()),
        std=std,
        minimum=float(arr.min()),
        q25=q25,
        median=median,
        q75=q75,
        maximum=float(arr.max()),
        value_range=float(arr.max() - arr.min()),
        degenerate=degenerate,
    )


def log_likelihood(matrix: WinMatrix, lambdas: np.ndarray) -> float:
    """Bradley-Terry log-likelihood of directed win counts under lambdas."""
    lam = np.asarray(lambdas, dtype=float)
    diff = lam[:, None] - lam[None, :]
    # log sigmoid, stable for large negative differences
    log_p = -np.logaddexp(0.0, -diff)
    return float(np.sum(matrix.wins * log_p))


def fit_per_style(
    judgments: list[Judgment],
    ids: list[str],
    styles: tuple[str, ...],
    tol: float = 1e-8,
    max_iters: int = 10000,
    pseudo_count: float = 0.0,
) -> dict[str, BTResult]:
    """One Bradley-Terry fit per style keyword."""
    out: dict[str, BTResult] = {}
    for style in styles:
        subset = [j for j in judgments if j.style == style]
        if not subset:
            raise EmptyInputError(f"no judgments for style {style!r}")
        matrix = win_matrix_from_judgments(subset, ids)
        fit = fit_bradley_terry(matrix, tol=tol, max_iters=max_iters, pseudo_count=pseudo_count)
        out[style] = replace(fit, style=style)
    return out


def top_items(result: BTResult, k: int) -> list[tuple[str, float]]:
    """The k highest-scored items, score-descending, ties id-ascending."""
    pairs = sorted(result.scores().items(), key=lambda kv: (-kv[1], kv[0]))
    return [(sid, score) for sid, score in pairs[:k]]
