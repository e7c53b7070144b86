"""Regression and distribution tests used by the analysis stages.

`ols_fit` solves least squares through a QR factorization and derives
classical standard errors, two-sided t p-values, and 95% confidence
intervals. p-values go through a self-contained regularized incomplete
beta function (continued fraction, Lentz's method) so the fitting path
carries no statistics-library dependency; scipy is used in the test
suite as an independent cross-check and here only for Shapiro-Wilk.

The dip statistic follows Hartigan's AS 217 construction (greatest
convex minorant / least concave majorant over the ECDF) and its p-value
is a seeded Monte-Carlo fraction against the uniform null.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import (
    DimensionMismatchError,
    EmptyInputError,
    NonFiniteValueError,
    NotNestedError,
    RankDeficientError,
    SampleSizeOutOfRangeError,
    TooFewPointsError,
    TooFewRowsError,
    ZeroVarianceError,
)

# --------------------------------------------------------------------------
# Regularized incomplete beta and the t / F tails built on it
# --------------------------------------------------------------------------

_BETACF_MAX_ITERS = 300
_BETACF_EPS = 1e-15


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (Lentz's method)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, _BETACF_MAX_ITERS + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _BETACF_EPS:
            break
    return h


def betainc_regularized(a: float, b: float, x: float) -> float:
    """I_x(a, b), exact 0 at x<=0 and exact 1 at x>=1."""
    if a <= 0 or b <= 0:
        raise ValueError("shape parameters must be positive")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_two_sided_p(t: float, df: float) -> float:
    """P(|T| >= |t|) for Student's t with df degrees of freedom."""
    if df <= 0:
        raise ValueError("df must be positive")
    return betainc_regularized(df / 2.0, 0.5, df / (df + t * t))


def t_cdf(t: float, df: float) -> float:
    p = t_two_sided_p(t, df)
    return 1.0 - p / 2.0 if t >= 0 else p / 2.0


def t_ppf(q: float, df: float) -> float:
    """Quantile of Student's t by bisection on `t_cdf`."""
    if not 0.0 < q < 1.0:
        raise ValueError("q must lie strictly inside (0, 1)")
    if q == 0.5:
        return 0.0
    if q < 0.5:
        return -t_ppf(1.0 - q, df)
    hi = 1.0
    while t_cdf(hi, df) < q and hi < 1e12:
        hi *= 2.0
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if t_cdf(mid, df) < q:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def f_sf(f: float, df1: float, df2: float) -> float:
    """P(F >= f); returns exactly 1.0 at f = 0."""
    if df1 <= 0 or df2 <= 0:
        raise ValueError("degrees of freedom must be positive")
    if f <= 0.0:
        return 1.0
    return betainc_regularized(df2 / 2.0, df1 / 2.0, df2 / (df2 + df1 * f))


def f_cdf(f: float, df1: float, df2: float) -> float:
    return 1.0 - f_sf(f, df1, df2)


# --------------------------------------------------------------------------
# Design matrices and OLS
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class DesignMatrix:
    names: tuple[str, ...]
    X: np.ndarray

    def __post_init__(self):
        if self.X.ndim != 2:
            raise DimensionMismatchError("design matrix must be 2-d")
        if self.X.shape[1] != len(self.names):
            raise DimensionMismatchError(
                f"{len(self.names)} names for {self.X.shape[1]} columns"
            )
        if len(set(self.names)) != len(self.names):
            raise ValueError("duplicate column names in design matrix")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def k(self) -> int:
        return self.X.shape[1]

    def column(self, name: str) -> np.ndarray:
        return self.X[:, self.names.index(name)]


def design_matrix(columns: list[tuple[str, np.ndarray]], add_intercept: bool = True) -> DesignMatrix:
    """Stack named predictor columns, optionally prefixing an intercept."""
    if not columns:
        raise EmptyInputError("no predictor columns")
    arrays = [np.asarray(col, dtype=float) for _, col in columns]
    n = arrays[0].shape[0]
    for (name, _), arr in zip(columns, arrays):
        if arr.ndim != 1 or arr.shape[0] != n:
            raise DimensionMismatchError(f"column {name!r} has shape {arr.shape}")
    names = [name for name, _ in columns]
    if add_intercept:
        names = ["intercept"] + names
        arrays = [np.ones(n)] + arrays
    return DesignMatrix(names=tuple(names), X=np.column_stack(arrays))


@dataclass(frozen=True)
class RegressionResult:
    names: tuple[str, ...]
    beta: np.ndarray
    se: np.ndarray
    t_values: np.ndarray
    p_values: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    n: int
    k: int
    df_resid: int
    rss: float
    tss: float
    r_squared: float
    adj_r_squared: float
    sigma2: float
    fitted: np.ndarray
    residuals: np.ndarray
    style: str | None = None

    def coef(self, name: str) -> float:
        return float(self.beta[self.names.index(name)])

    def p_value(self, name: str) -> float:
        return float(self.p_values[self.names.index(name)])

    def rows(self) -> list[dict]:
        """Per-coefficient summary rows in design order."""
        out = []
        for i, name in enumerate(self.names):
            out.append({
                "term": name,
                "beta": float(self.beta[i]),
                "se": float(self.se[i]),
                "t": float(self.t_values[i]),
                "p": float(self.p_values[i]),
                "ci_low": float(self.ci_low[i]),
                "ci_high": float(self.ci_high[i]),
            })
        return out


_RANK_RTOL = 1e-10


def ols_fit(
    design: DesignMatrix,
    y: np.ndarray,
    alpha: float = 0.05,
    style: str | None = None,
) -> RegressionResult:
    """Ordinary least squares with classical (homoskedastic) inference.

    R-squared is computed against the mean-centred total sum of squares,
    which presumes the design spans a constant; fits with no intercept
    column still run but report R-squared under that convention.
    """
    y = np.asarray(y, dtype=float)
    X = design.X.astype(float)
    n, k = X.shape
    if y.ndim != 1 or y.shape[0] != n:
        raise DimensionMismatchError(f"y has shape {y.shape}, design has {n} rows")
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(X))):
        raise NonFiniteValueError("regression inputs must be finite")
    if n <= k:
        raise TooFewRowsError(f"need more rows ({n}) than parameters ({k})")

    singular = np.linalg.svd(X, compute_uv=False)
    if singular[-1] <= singular[0] * _RANK_RTOL:
        raise RankDeficientError(
            f"design matrix is numerically rank deficient "
            f"(condition ~{singular[0] / max(singular[-1], 1e-300):.2e})"
        )

    q, r = np.linalg.qr(X)
    beta = np.linalg.solve(r, q.T @ y)
    fitted = X @ beta
    resid = y - fitted
    rss = float(resid @ resid)
    centered = y - y.mean()
    tss = float(centered @ centered)
    if tss == 0.0:
        raise ZeroVarianceError("response has zero variance")

    df_resid = n - k
    sigma2 = rss / df_resid
    r_inv = np.linalg.solve(r, np.eye(k))
    xtx_inv = r_inv @ r_inv.T
    se = np.sqrt(sigma2 * np.diag(xtx_inv))

    t_vals = np.where(se > 0, beta / np.where(se > 0, se, 1.0), np.inf * np.sign(beta))
    p_vals = np.array([t_two_sided_p(float(t), df_resid) for t in t_vals])
    t_crit = t_ppf(1.0 - alpha / 2.0, df_resid)
    ci_low = beta - t_crit * se
    ci_high = beta + t_crit * se

    r2 = 1.0 - rss / tss
    adj_r2 = 1.0 - (1.0 - r2) * (n - 1) / df_resid
    return RegressionResult(
        names=design.names,
        beta=beta,
        se=se,
        t_values=t_vals,
        p_values=p_vals,
        ci_low=ci_low,
        ci_high=ci_high,
        n=n,
        k=k,
        df_resid=df_resid,
        rss=rss,
        tss=tss,
        r_squared=r2,
        adj_r_squared=adj_r2,
        sigma2=sigma2,
        fitted=fitted,
        residuals=resid,
        style=style,
    )


@dataclass(frozen=True)
class FTestResult:
    f_value: float
    df1: int
    df2: int
    p_value: float
    rss_full: float
    rss_restricted: float


def nested_f_test(restricted: RegressionResult, full: RegressionResult) -> FTestResult:
    """F-test of a restricted model against the full model it nests in.

    Both fits must use the same rows and the restricted model's terms must
    be a subset of the full model's. Identical term sets give F = 0 and
    p = 1 exactly.
    """
    if full.n != restricted.n:
        raise NotNestedError(f"row counts differ: {full.n} vs {restricted.n}")
    if not set(restricted.names) <= set(full.names):
        extra = set(restricted.names) - set(full.names)
        raise NotNestedError(f"restricted model has terms not in the full model: {sorted(extra)}")
    df1 = full.k - restricted.k
    df2 = full.df_resid
    if df1 == 0:
        return FTestResult(0.0, 0, df2, 1.0, full.rss, restricted.rss)
    if full.rss == 0.0:
        return FTestResult(math.inf, df1, df2, 0.0, full.rss, restricted.rss)
    f_val = ((restricted.rss - full.rss) / df1) / (full.rss / df2)
    if f_val < 0.0:
        f_val = 0.0
    return FTestResult(
        f_value=f_val,
        df1=df1,
        df2=df2,
        p_value=f_sf(f_val, df1, df2),
        rss_full=full.rss,
        rss_restricted=restricted.rss,
    )


# --------------------------------------------------------------------------
# Correlation matrix and column utilities
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class CorrelationMatrix:
    names: tuple[str, ...]
    values: np.ndarray

    def get(self, a: str, b: str) -> float:
        return float(self.values[self.names.index(a), self.names.index(b)])


def pearson_corr_matrix(columns: list[tuple[str, np.ndarray]]) -> CorrelationMatrix:
    """Pairwise Pearson correlations; the diagonal is exactly 1.0."""
    if not columns:
        raise EmptyInputError("no columns to correlate")
    arrays = [np.asarray(col, dtype=float) for _, col in columns]
    n = arrays[0].shape[0]
    for (name, _), arr in zip(columns, arrays):
        if arr.ndim != 1 or arr.shape[0] != n:
            raise DimensionMismatchError(f"column {name!r} has shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise NonFiniteValueError(f"column {name!r} has non-finite entries")
    if n < 3:
        raise TooFewPointsError("correlation needs at least 3 rows")

    centred = []
    for (name, _), arr in zip(columns, arrays):
        c = arr - arr.mean()
        norm = math.sqrt(float(c @ c))
        if norm == 0.0:
            raise ZeroVarianceError(f"column {name!r} has zero variance")
        centred.append(c / norm)

    m = len(centred)
    values = np.eye(m)
    for i in range(m):
        for j in range(i + 1, m):
            r = float(centred[i] @ centred[j])
            r = min(1.0, max(-1.0, r))
            values[i, j] = values[j, i] = r
    return CorrelationMatrix(names=tuple(name for name, _ in columns), values=values)


def listwise_complete(columns: list[tuple[str, np.ndarray]]) -> tuple[list[tuple[str, np.ndarray]], int]:
    """Drop every row that is NaN in any column. Returns (kept, n_dropped)."""
    arrays = [np.asarray(col, dtype=float) for _, col in columns]
    n = arrays[0].shape[0]
    keep = np.ones(n, dtype=bool)
    for arr in arrays:
        if arr.shape[0] != n:
            raise DimensionMismatchError("columns differ in length")
        keep &= ~np.isnan(arr)
    kept = [(name, arr[keep]) for (name, _), arr in zip(columns, arrays)]
    return kept, int(n - keep.sum())


def drop_zero_variance(columns: list[tuple[str, np.ndarray]]) -> tuple[list[tuple[str, np.ndarray]], list[str]]:
    """Split columns into (varying, names_of_constant_columns)."""
    kept, dropped = [], []
    for name, col in columns:
        arr = np.asarray(col, dtype=float)
        if arr.size and float(arr.max()) == float(arr.min()):
            dropped.append(name)
        else:
            kept.append((name, arr))
    return kept, dropped


def standardize(values: np.ndarray) -> np.ndarray:
    """Center to mean zero and scale by the sample std (n-1 denominator)."""
    arr = np.asarray(values, dtype=float)
    if arr.size < 2:
        raise TooFewPointsError("standardization needs at least 2 values")
    sd = float(np.std(arr, ddof=1))
    if sd == 0.0:
        raise ZeroVarianceError("cannot standardize a constant column")
    return (arr - arr.mean()) / sd


# --------------------------------------------------------------------------
# Hartigan's dip test
# --------------------------------------------------------------------------

def dip_statistic(values: np.ndarray) -> float:
    """Hartigan & Hartigan's dip of a univariate sample (AS 217).

    Max distance between the ECDF and the closest unimodal distribution
    function, computed through alternating greatest-convex-minorant /
    least-concave-majorant fits over a shrinking modal interval.
    """
    x = np.sort(np.asarray(values, dtype=float))
    n = x.shape[0]
    if n < 4:
        raise TooFewPointsError(f"dip statistic needs at least 4 points, got {n}")
    if not np.all(np.isfinite(x)):
        raise NonFiniteValueError("dip input must be finite")
    if x[0] == x[-1]:
        return 0.0
    xs = x.tolist()

    # mn[j]: leftmost index combined with j in the convex minorant fit
    mn = [0] * n
    for j in range(1, n):
        mn[j] = j - 1
        while True:
            mnj = mn[j]
            if mnj == 0:
                break
            mnmnj = mn[mnj]
            if (xs[j] - xs[mnj]) * (mnj - mnmnj) < (xs[mnj] - xs[mnmnj]) * (j - mnj):
                break
            mn[j] = mnmnj

    # mj[k]: rightmost index combined with k in the concave majorant fit
    mj = [0] * n
    mj[n - 1] = n - 1
    for k in range(n - 2, -1, -1):
        mj[k] = k + 1
        while True:
            mjk = mj[k]
            if mjk == n - 1:
                break
            mjmjk = mj[mjk]
            if (xs[k] - xs[mjk]) * (mjk - mjmjk) < (xs[mjk] - xs[mjmjk]) * (k - mjk):
                break
            mj[k] = mjmjk

    low, high = 0, n - 1
    d_scaled = 0.0  # dip times 2n
    gcm = [0] * (n + 1)
    lcm = [0] * (n + 1)
    while True:
        gcm[0] = high
        i = 0
        while gcm[i] > low:
            gcm[i + 1] = mn[gcm[i]]
            i += 1
        ig = l_gcm = i
        ix = ig - 1

        lcm[0] = low
        i = 0
        while lcm[i] < high:
            lcm[i + 1] = mj[lcm[i]]
            i += 1
        ih = l_lcm = i
        iv = 1

        d = 0.0
        if l_gcm != 1 or l_lcm != 1:
            while True:
                gcmix = gcm[ix]
                lcmiv = lcm[iv]
                if gcmix > lcmiv:
                    gcmi1 = gcm[ix + 1]
                    dx = (lcmiv - gcmi1 + 1) - (xs[lcmiv] - xs[gcmi1]) * (gcmix - gcmi1) / (xs[gcmix] - xs[gcmi1])
                    iv += 1
                    if dx >= d:
                        d = dx
                        ig = ix + 1
                        ih = iv - 1
                else:
                    lcmiv1 = lcm[iv - 1]
                    dx = (xs[gcmix] - xs[lcmiv1]) * (lcmiv - lcmiv1) / (xs[lcmiv] - xs[lcmiv1]) - (gcmix - lcmiv1 - 1)
                    ix -= 1
                    if dx >= d:
                        d = dx
                        ig = ix + 1
                        ih = iv
                if ix < 0:
                    ix = 0
                if iv > l_lcm:
                    iv = l_lcm
                if gcm[ix] == lcm[iv]:
                    break

        if d < d_scaled:
            break

        # largest deviation below the minorant inside the modal interval
        dip_l = 0.0
        for j in range(ig, l_gcm):
            max_t = 1.0
            jb, je = gcm[j + 1], gcm[j]
            if je - jb > 1 and xs[je] != xs[jb]:
                c = (je - jb) / (xs[je] - xs[jb])
                for jj in range(jb, je + 1):
                    t = (jj - jb + 1) - (xs[jj] - xs[jb]) * c
                    if max_t < t:
                        max_t = t
            if dip_l < max_t:
                dip_l = max_t

        # largest deviation above the majorant inside the modal interval
        dip_u = 0.0
        for j in range(ih, l_lcm):
            max_t = 1.0
            jb, je = lcm[j], lcm[j + 1]
            if je - jb > 1 and xs[je] != xs[jb]:
                c = (je - jb) / (xs[je] - xs[jb])
                for jj in range(jb, je + 1):
                    t = (xs[jj] - xs[jb]) * c - (jj - jb - 1)
                    if max_t < t:
                        max_t = t
            if dip_u < max_t:
                dip_u = max_t

        dip_new = dip_u if dip_u > dip_l else dip_l
        if d_scaled < dip_new:
            d_scaled = dip_new
        if low == gcm[ig] and high == lcm[ih]:
            break
        low = gcm[ig]
        high = lcm[ih]

    return d_scaled / (2 * n)


@lru_cache(maxsize=32)
def _null_dips(n: int, reps: int, seed: int) -> np.ndarray:
    """Sorted dip statistics of `reps` uniform samples of size n."""
    rng = np.random.default_rng(seed)
    samples = np.sort(rng.random((reps, n)), axis=1)
    dips = np.fromiter((dip_statistic(row) for row in samples), dtype=float, count=reps)
    dips.sort()
    return dips


@dataclass(frozen=True)
class DipResult:
    statistic: float
    p_value: float
    n: int
    monte_carlo_reps: int
    seed: int


def dip_test(values: np.ndarray, reps: int = 10000, seed: int = 0) -> DipResult:
    """Dip statistic plus a Monte-Carlo p-value against the uniform null.

    The p-value is the exact fraction count/reps of uniform(0, 1) samples
    of the same size whose dip is >= the observed one. The null table is
    cached per (n, reps, seed), so repeated tests at one sample size pay
    for the simulation once.
    """
    x = np.asarray(values, dtype=float)
    if x.size < 4:
        raise TooFewPointsError(f"dip test needs at least 4 points, got {x.size}")
    if reps < 1:
        raise ValueError("reps must be >= 1")
    observed = dip_statistic(x)
    null = _null_dips(int(x.size), int(reps), int(seed))
    count = int(reps - np.searchsorted(null, observed, side="left"))
    return DipResult(
        statistic=observed,
        p_value=count / reps,
        n=int(x.size),
        monte_carlo_reps=int(reps),
        seed=int(seed),
    )


# --------------------------------------------------------------------------
# Shapiro-Wilk (delegated: the coefficient tables and tail approximations
# are standard and scipy's implementation is the reference one)
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ShapiroResult:
    statistic: float
    p_value: float
    n: int


def shapiro_wilk(values: np.ndarray) -> ShapiroResult:
    from scipy import stats as _scipy_stats

    x = np.asarray(values, dtype=float)
    if not 3 <= x.size <= 5000:
        raise SampleSizeOutOfRangeError(
            f"Shapiro-Wilk is supported for 3..5000 points, got {x.size}"
        )
    if not np.all(np.isfinite(x)):
        raise NonFiniteValueError("Shapiro-Wilk input must be finite")
    if float(x.max()) == float(x.min()):
        raise ZeroVarianceError("Shapiro-Wilk input is constant")
    res = _scipy_stats.shapiro(x)
    return ShapiroResult(statistic=float(res.statistic), p_value=float(res.pvalue), n=int(x.size))
