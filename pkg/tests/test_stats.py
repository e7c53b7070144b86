"""Regression, F-test, correlation, dip and Shapiro-Wilk against oracles.

Distribution helpers are compared to reference values frozen from an
independent implementation; OLS is checked against a normal-equations
solve; the dip statistic is checked against an exact LP formulation.
"""

import math
from fractions import Fraction

import numpy as np
import pytest
from scipy.optimize import linprog

from stylelab.errors import (
    NotNestedError,
    RankDeficientError,
    SampleSizeOutOfRangeError,
    TooFewPointsError,
    TooFewRowsError,
    ZeroVarianceError,
)
from stylelab.stats import (
    betainc_regularized,
    design_matrix,
    dip_statistic,
    dip_test,
    drop_zero_variance,
    f_sf,
    listwise_complete,
    nested_f_test,
    ols_fit,
    pearson_corr_matrix,
    shapiro_wilk,
    standardize,
    t_cdf,
    t_ppf,
    t_two_sided_p,
)


# --------------------------------------------------------------------------
# distribution helpers
# --------------------------------------------------------------------------

def test_t_and_f_frozen_reference_values():
    # frozen from an independent distribution library
    assert t_two_sided_p(2.0, 10) == pytest.approx(0.073388034770740, abs=1e-10)
    assert t_two_sided_p(-1.3, 4) == pytest.approx(0.263451596471224, abs=1e-10)
    assert t_cdf(1.5, 12) == pytest.approx(0.920271248243397, abs=1e-10)
    assert t_ppf(0.975, 7) == pytest.approx(2.364624251592784, abs=1e-6)
    assert t_ppf(0.995, 30) == pytest.approx(2.749995653567030, abs=1e-6)
    assert f_sf(3.5, 4, 20) == pytest.approx(0.025385230866441, abs=1e-10)
    assert f_sf(1.0, 8, 702) == pytest.approx(0.434576506691744, abs=1e-10)


def test_distribution_identities():
    assert t_cdf(0.0, 9) == 0.5
    assert f_sf(0.0, 3, 10) == 1.0
    assert betainc_regularized(2.5, 1.5, 0.0) == 0.0
    assert betainc_regularized(2.5, 1.5, 1.0) == 1.0
    # symmetry: I_x(a,b) = 1 - I_{1-x}(b,a)
    assert betainc_regularized(2.0, 5.0, 0.3) == pytest.approx(
        1.0 - betainc_regularized(5.0, 2.0, 0.7), abs=1e-14
    )
    xs = np.linspace(-4, 4, 33)
    cdf = [t_cdf(float(x), 6) for x in xs]
    assert all(b >= a for a, b in zip(cdf, cdf[1:]))
    for q in (0.6, 0.9, 0.975):
        assert t_cdf(t_ppf(q, 11), 11) == pytest.approx(q, abs=1e-9)


# --------------------------------------------------------------------------
# OLS
# --------------------------------------------------------------------------

def normal_equations_oracle(X: np.ndarray, y: np.ndarray):
    """Textbook (X'X)^-1 X'y with classical standard errors."""
    xtx_inv = np.linalg.inv(X.T @ X)
    beta = xtx_inv @ X.T @ y
    resid = y - X @ beta
    df = X.shape[0] - X.shape[1]
    sigma2 = float(resid @ resid) / df
    se = np.sqrt(sigma2 * np.diag(xtx_inv))
    t = beta / se
    return beta, se, t, df


def test_ols_matches_normal_equations_on_seeded_designs():
    rng = np.random.default_rng(17)
    for _ in range(25):
        n = 60
        k = int(rng.integers(2, 8))
        cols = [(f"x{j}", rng.normal(size=n)) for j in range(k)]
        y = rng.normal(size=n)
        dm = design_matrix(cols)
        fit = ols_fit(dm, y)
        beta, se, t, df = normal_equations_oracle(dm.X, y)
        assert np.max(np.abs(fit.beta - beta)) < 1e-8
        assert np.max(np.abs(fit.se - se)) < 1e-8
        assert np.max(np.abs(fit.t_values - t)) < 1e-6
        assert fit.df_resid == df
        # residuals orthogonal to the design
        assert np.max(np.abs(dm.X.T @ fit.residuals)) <= 1e-8 * np.linalg.norm(y)


def test_noiseless_fit_is_exact():
    x = np.arange(20.0)
    y = 1.0 + 2.0 * x
    fit = ols_fit(design_matrix([("x", x)]), y)
    assert fit.coef("intercept") == pytest.approx(1.0, abs=1e-10)
    assert fit.coef("x") == pytest.approx(2.0, abs=1e-10)
    assert abs(fit.r_squared - 1.0) < 1e-12


def test_shifting_y_moves_only_the_intercept():
    rng = np.random.default_rng(5)
    x = rng.normal(size=50)
    y = 0.3 * x + rng.normal(size=50)
    dm = design_matrix([("x", x)])
    base = ols_fit(dm, y)
    shifted = ols_fit(dm, y + 10.0)
    assert shifted.coef("intercept") == pytest.approx(base.coef("intercept") + 10.0, abs=1e-9)
    assert shifted.coef("x") == pytest.approx(base.coef("x"), abs=1e-10)
    assert shifted.se[1] == pytest.approx(base.se[1], abs=1e-10)


def test_ci_covers_beta_and_matches_p_at_boundary():
    rng = np.random.default_rng(9)
    x = rng.normal(size=40)
    y = 1.0 + 0.5 * x + rng.normal(size=40) * 0.4
    fit = ols_fit(design_matrix([("x", x)]), y, alpha=0.05)
    i = fit.names.index("x")
    assert fit.ci_low[i] < fit.beta[i] < fit.ci_high[i]
    # CI excludes zero exactly when p < alpha
    excludes = fit.ci_low[i] > 0 or fit.ci_high[i] < 0
    assert excludes == (fit.p_values[i] < 0.05)


def test_ols_error_paths():
    x = np.arange(10.0)
    with pytest.raises(RankDeficientError):
        ols_fit(design_matrix([("a", x), ("b", 2.0 * x)]), x)
    with pytest.raises(TooFewRowsError):
        ols_fit(design_matrix([("a", np.array([1.0, 2.0]))]), np.array([1.0, 2.0]))
    with pytest.raises(ZeroVarianceError):
        ols_fit(design_matrix([("a", x)]), np.ones(10))


# --------------------------------------------------------------------------
# nested F-test
# --------------------------------------------------------------------------

def frac_rss(cols, y):
    """Least-squares RSS in exact rational arithmetic (Cramer-style solve)."""
    n, k = len(y), len(cols)
    X = [[Fraction(cols[j][i]) for j in range(k)] for i in range(n)]
    A = [[sum(X[i][a] * X[i][b] for i in range(n)) for b in range(k)] for a in range(k)]
    b = [sum(X[i][a] * Fraction(y[i]) for i in range(n)) for a in range(k)]
    M = [row[:] + [bv] for row, bv in zip(A, b)]
    for col in range(k):
        piv = next(r for r in range(col, k) if M[r][col] != 0)
        M[col], M[piv] = M[piv], M[col]
        M[col] = [v / M[col][col] for v in M[col]]
        for r in range(k):
            if r != col and M[r][col] != 0:
                f = M[r][col]
                M[r] = [u - f * v for u, v in zip(M[r], M[col])]
    beta = [M[r][k] for r in range(k)]
    return sum((Fraction(y[i]) - sum(beta[j] * X[i][j] for j in range(k))) ** 2 for i in range(n))


def test_nested_f_matches_exact_arithmetic():
    x1 = list(range(10))
    x2 = [v * v for v in x1]
    y = [1, 3, 2, 5, 4, 7, 6, 9, 8, 11]
    ones = [1] * 10
    rss_r = frac_rss([ones, x1], y)
    rss_f = frac_rss([ones, x1, x2], y)
    expected_f = ((rss_r - rss_f) / Fraction(1)) / (rss_f / Fraction(7))
    assert expected_f == Fraction(315, 1423)

    xa = np.array(x1, dtype=float)
    fit_r = ols_fit(design_matrix([("x1", xa)]), np.array(y, dtype=float))
    fit_f = ols_fit(design_matrix([("x1", xa), ("x2", xa * xa)]), np.array(y, dtype=float))
    ft = nested_f_test(fit_r, fit_f)
    assert abs(ft.f_value - float(expected_f)) < 1e-10
    assert ft.df1 == 1 and ft.df2 == 7
    assert ft.p_value == pytest.approx(0.652310496471582, abs=1e-9)


def test_identical_models_give_zero_and_one_exactly():
    rng = np.random.default_rng(2)
    x = rng.normal(size=30)
    y = rng.normal(size=30)
    fit = ols_fit(design_matrix([("x", x)]), y)
    ft = nested_f_test(fit, fit)
    assert ft.f_value == 0.0
    assert ft.p_value == 1.0
    assert ft.df1 == 0


def test_not_nested_raises():
    rng = np.random.default_rng(6)
    x = rng.normal(size=30)
    z = rng.normal(size=30)
    y = rng.normal(size=30)
    fit_x = ols_fit(design_matrix([("x", x)]), y)
    fit_z = ols_fit(design_matrix([("z", z)]), y)
    with pytest.raises(NotNestedError):
        nested_f_test(fit_x, fit_z)
    fit_short = ols_fit(design_matrix([("x", x[:20])]), y[:20])
    with pytest.raises(NotNestedError):
        nested_f_test(fit_short, fit_x)


def test_perfect_full_fit_gives_infinite_f():
    import dataclasses

    x = np.arange(12.0)
    y = 3.0 * x - 1.0
    fit_r = ols_fit(design_matrix([("noise", np.cos(x))]), y)
    fit_f = ols_fit(design_matrix([("noise", np.cos(x)), ("x", x)]), y)
    ft = nested_f_test(fit_r, fit_f)
    # numerically the planted fit leaves ~1e-28 residual, so F is astronomical
    assert ft.f_value > 1e20
    assert ft.p_value < 1e-100
    # a mathematically exact fit reports the infinite edge
    exact = dataclasses.replace(fit_f, rss=0.0)
    ft = nested_f_test(fit_r, exact)
    assert math.isinf(ft.f_value)
    assert ft.p_value == 0.0


# --------------------------------------------------------------------------
# correlation matrix and column helpers
# --------------------------------------------------------------------------

def test_corr_matrix_properties():
    rng = np.random.default_rng(77)
    cols = [(f"c{j}", rng.normal(size=40)) for j in range(6)]
    cm = pearson_corr_matrix(cols)
    v = cm.values
    assert np.all(np.diag(v) == 1.0)
    assert np.array_equal(v, v.T)
    assert np.all(np.abs(v) <= 1.0)
    # a correlation matrix is positive semidefinite
    assert np.linalg.eigvalsh(v).min() >= -1e-8
    # matches direct pairwise computation
    a, b = cols[0][1], cols[3][1]
    manual = float(np.corrcoef(a, b)[0, 1])
    assert cm.get("c0", "c3") == pytest.approx(manual, abs=1e-12)


def test_corr_matrix_errors():
    with pytest.raises(ZeroVarianceError):
        pearson_corr_matrix([("a", np.ones(10)), ("b", np.arange(10.0))])
    with pytest.raises(TooFewPointsError):
        pearson_corr_matrix([("a", np.array([1.0, 2.0])), ("b", np.array([2.0, 1.0]))])


def test_column_helpers():
    cols = [
        ("a", np.array([1.0, np.nan, 3.0, 4.0])),
        ("b", np.array([2.0, 2.0, np.nan, 5.0])),
    ]
    kept, dropped = listwise_complete(cols)
    assert dropped == 2
    assert np.array_equal(kept[0][1], [1.0, 4.0])

    varying, constant = drop_zero_variance([("a", np.ones(5)), ("b", np.arange(5.0))])
    assert constant == ["a"]
    assert [name for name, _ in varying] == ["b"]

    z = standardize(np.array([1.0, 2.0, 3.0, 4.0]))
    assert z.mean() == pytest.approx(0.0, abs=1e-12)
    assert np.std(z, ddof=1) == pytest.approx(1.0, abs=1e-12)


# --------------------------------------------------------------------------
# dip statistic and test
# --------------------------------------------------------------------------

def dip_lp_oracle(xs):
    """Exact dip via one LP per candidate modal knot.

    Minimizes d over piecewise-linear unimodal CDFs G with knots at the
    sorted sample: G stays within d of both one-sided empirical CDF
    limits at each knot, is monotone, convex left of the modal knot and
    concave right of it.
    """
    xs = sorted(xs)
    n = len(xs)
    best = None
    for t in range(n):
        c = [0.0] * n + [1.0]
        A_ub, b_ub = [], []
        for i in range(n):
            for target in ((i + 1) / n, i / n):
                row = [0.0] * (n + 1)
                row[i], row[n] = 1.0, -1.0
                A_ub.append(row)
                b_ub.append(target)
                row = [0.0] * (n + 1)
                row[i], row[n] = -1.0, -1.0
                A_ub.append(row)
                b_ub.append(-target)
        for i in range(n - 1):
            row = [0.0] * (n + 1)
            row[i], row[i + 1] = 1.0, -1.0
            A_ub.append(row)
            b_ub.append(0.0)
        h = [xs[i + 1] - xs[i] for i in range(n - 1)]
        for i in range(n - 2):
            row = [0.0] * (n + 1)
            row[i] += -1.0 / h[i]
            row[i + 1] += 1.0 / h[i] + 1.0 / h[i + 1]
            row[i + 2] += -1.0 / h[i + 1]
            if i + 1 <= t - 1:
                A_ub.append(row)
            else:
                A_ub.append([-v for v in row])
            b_ub.append(0.0)
        bounds = [(0.0, 1.0)] * n + [(0.0, None)]
        res = linprog(c, A_ub=np.array(A_ub), b_ub=np.array(b_ub), bounds=bounds, method="highs")
        assert res.status == 0, res.message
        if best is None or res.fun < best:
            best = res.fun
    return best


def test_dip_lp_oracle_self_check():
    # the classic two-point result
    assert dip_lp_oracle([0.0, 1.0]) == pytest.approx(0.25, abs=1e-9)


def test_dip_matches_lp_oracle():
    rng = np.random.default_rng(31)
    for trial in range(30):
        xs = np.sort(rng.normal(size=5) * (1.0 + trial % 3))
        assert len(set(xs.tolist())) == 5
        assert dip_statistic(xs) == pytest.approx(dip_lp_oracle(list(xs)), abs=1e-9)


def test_dip_edge_cases():
    assert dip_statistic(np.array([3.0, 3.0, 3.0, 3.0])) == 0.0
    with pytest.raises(TooFewPointsError):
        dip_statistic(np.array([1.0, 2.0, 3.0]))
    rng = np.random.default_rng(1)
    xs = rng.normal(size=200)
    d = dip_statistic(xs)
    assert 0.0 < d <= 0.25


def test_dip_test_seeded_and_deterministic():
    rng = np.random.default_rng(12)
    xs = rng.normal(size=80)
    r1 = dip_test(xs, reps=500, seed=4)
    r2 = dip_test(xs, reps=500, seed=4)
    assert r1.p_value == r2.p_value
    assert r1.n == 80 and r1.monte_carlo_reps == 500
    assert 0.0 <= r1.p_value <= 1.0
    # strongly bimodal sample must look non-uniform
    bimodal = np.concatenate([rng.normal(-4, 1, 100), rng.normal(4, 1, 100)])
    assert dip_test(bimodal, reps=500, seed=4).p_value < 0.01


# --------------------------------------------------------------------------
# Shapiro-Wilk
# --------------------------------------------------------------------------

def test_shapiro_worked_example():
    # classic textbook sample of 11 weights; published W rounds to 0.79
    weights = np.array([148, 154, 158, 160, 161, 162, 166, 170, 182, 195, 236], dtype=float)
    res = shapiro_wilk(weights)
    assert res.statistic == pytest.approx(0.7888, abs=1e-3)
    assert res.p_value < 0.05
    assert res.n == 11


def test_shapiro_errors():
    with pytest.raises(SampleSizeOutOfRangeError):
        shapiro_wilk(np.array([1.0, 2.0]))
    with pytest.raises(SampleSizeOutOfRangeError):
        shapiro_wilk(np.zeros(5001))
    with pytest.raises(ZeroVarianceError):
        shapiro_wilk(np.ones(10))
