import numpy as np
import pandas as pd
import pytest
import statsmodels.api as sm

from prefarb.errors import DataError, RankDeficiencyError
from prefarb.regression import adjusted_r2, factor_regression, load_factors, regress_aligned

NAMES = ["MKT", "SMB", "HML", "RMW", "CMA"]


def _factors(rng, n=750, k=5):
    return rng.normal(0, 0.01, (n, k))


def test_matches_statsmodels(rng):
    F = _factors(rng)
    y = 2e-4 + F @ np.array([0.3, -0.1, 0.05, 0.0, 0.2]) + rng.normal(0, 0.005, len(F))
    res = factor_regression(y, F, NAMES)
    ols = sm.OLS(y, sm.add_constant(F)).fit()
    assert res.alpha == pytest.approx(ols.params[0], rel=1e-9, abs=1e-14)
    np.testing.assert_allclose(list(res.betas.values()), ols.params[1:], rtol=1e-9)
    np.testing.assert_allclose([res.alpha_se, *res.beta_se.values()], ols.bse, rtol=1e-9)
    np.testing.assert_allclose([res.alpha_p, *res.beta_p.values()], ols.pvalues, rtol=1e-6, atol=1e-300)
    assert res.r2 == pytest.approx(ols.rsquared, rel=1e-12)
    assert res.adj_r2 == pytest.approx(ols.rsquared_adj, rel=1e-12)
    assert res.n_obs == 750
    assert res.significant()["MKT"] and not res.significant()["RMW"]


def test_perfect_fit(rng):
    F = _factors(rng, k=2)
    res = factor_regression(F[:, 0], F, ["f1", "f2"])
    assert res.betas["f1"] == pytest.approx(1.0, abs=1e-12)
    assert res.betas["f2"] == pytest.approx(0.0, abs=1e-12)
    assert res.alpha == pytest.approx(0.0, abs=1e-15)
    assert res.adj_r2 == pytest.approx(1.0, abs=1e-12)


def test_null_case(rng):
    F = _factors(rng, n=2000)
    res = factor_regression(rng.normal(0, 0.01, 2000), F, NAMES)
    assert abs(res.adj_r2) < 0.01


def test_known_loadings_within_two_se(rng):
    F = _factors(rng, n=1000, k=2)
    y = 0.5 * F[:, 0] - 0.2 * F[:, 1] + rng.normal(0, 0.01, 1000)
    res = factor_regression(y, F, ["f1", "f2"])
    assert abs(res.betas["f1"] - 0.5) < 2 * res.beta_se["f1"]
    assert abs(res.betas["f2"] + 0.2) < 2 * res.beta_se["f2"]
    assert abs(res.alpha) < 2 * res.alpha_se


def test_adjusted_r2_formula():
    assert adjusted_r2(0.5, 101, 5) == pytest.approx(1 - 0.5 * 100 / 95, rel=1e-15)
    assert adjusted_r2(1.0, 30, 3) == 1.0


def test_errors(rng):
    F = _factors(rng, n=50, k=2)
    with pytest.raises(RankDeficiencyError):
        factor_regression(rng.normal(size=50), np.column_stack([F, F[:, 0] * 2]))
    with pytest.raises(RankDeficiencyError):
        factor_regression(rng.normal(size=50), np.ones((50, 1)))
    with pytest.raises(DataError):
        factor_regression(rng.normal(size=3), F[:3])
    with pytest.raises(DataError):
        factor_regression(rng.normal(size=49), F)
    with pytest.raises(DataError):
        factor_regression(rng.normal(size=50), F, ["only-one"])


def test_aligned_regression(tmp_path, rng):
    dates = pd.bdate_range("2021-01-04", periods=300)
    F = _factors(rng, n=300, k=2)
    fac = pd.DataFrame({"date": dates.strftime("%Y-%m-%d"), "MKT": F[:, 0], "SMB": F[:, 1]})
    path = tmp_path / "f.csv"
    fac.to_csv(path, index=False)
    factors = load_factors(path)
    y = pd.Series(0.8 * F[:, 0] + rng.normal(0, 1e-3, 300), index=dates)
    # drop some return dates; only shared dates enter the fit
    res = regress_aligned(y.iloc[20:], factors)
    assert res.n_obs == 280
    direct = factor_regression(y.iloc[20:].to_numpy(), F[20:], ["MKT", "SMB"])
    assert res.betas == pytest.approx(direct.betas, rel=1e-12)
    with pytest.raises(DataError):
        load_factors(tmp_path / "none.csv")
