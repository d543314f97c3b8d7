"""OLS of portfolio returns on factor returns."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd
from scipy import stats

from .errors import DataError, RankDeficiencyError


@dataclass(frozen=True)
class FactorRegressionResult:
    alpha: float
    betas: dict[str, float]
    adj_r2: float
    r2: float
    n_obs: int
    alpha_se: float
    beta_se: dict[str, float]
    alpha_p: float
    beta_p: dict[str, float]

    def significant(self, level: float = 0.05) -> dict[str, bool]:
        out = {"alpha": self.alpha_p < level}
        out.update({k: p < level for k, p in self.beta_p.items()})
        return out

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "betas": self.betas,
            "adj_r2": self.adj_r2,
            "r2": self.r2,
            "n_obs": self.n_obs,
            "alpha_se": self.alpha_se,
            "beta_se": self.beta_se,
            "alpha_p": self.alpha_p,
            "beta_p": self.beta_p,
            "significant_0.05": self.significant(),
        }


def adjusted_r2(r2: float, n_obs: int, k: int) -> float:
    """``1 - (1 - R^2)(n - 1)/(n - k - 1)`` for ``k`` regressors besides the intercept."""
    return 1.0 - (1.0 - r2) * (n_obs - 1) / (n_obs - k - 1)


def factor_regression(portfolio_returns, factors, factor_names=None) -> FactorRegressionResult:
    """Regress returns on an intercept plus ``k`` factors by least squares.

    Standard errors come from the residual variance with n - k - 1 degrees of
    freedom; p-values are two-sided Student t.
    """
    y = np.asarray(portfolio_returns, dtype=float)
    F = np.asarray(factors, dtype=float)
    if F.ndim == 1:
        F = F[:, None]
    n, k = F.shape
    names = list(factor_names) if factor_names is not None else [f"f{i}" for i in range(k)]
    if len(names) != k:
        raise DataError(f"{len(names)} factor names for {k} factor columns")
    if len(y) != n:
        raise DataError(f"{len(y)} returns vs {n} factor rows")
    if n <= k + 1:
        raise DataError(f"need more than {k + 1} observations, got {n}")
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(F))):
        raise DataError("non-finite value in regression inputs")

    X = np.column_stack([np.ones(n), F])
    if np.linalg.matrix_rank(X) < k + 1:
        raise RankDeficiencyError("factor matrix (with intercept) is rank deficient")
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    ssr = float(resid @ resid)
    tss = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - ssr / tss if tss > 0 else 1.0

    dof = n - k - 1
    cov = ssr / dof * np.linalg.inv(X.T @ X)
    se = np.sqrt(np.diag(cov))
    with np.errstate(divide="ignore", invalid="ignore"):
        tvals = np.where(se > 0, coef / se, np.where(coef == 0, 0.0, np.inf))
    pvals = 2.0 * stats.t.sf(np.abs(tvals), dof)

    return FactorRegressionResult(
        alpha=float(coef[0]),
        betas=dict(zip(names, map(float, coef[1:]))),
        adj_r2=adjusted_r2(r2, n, k),
        r2=r2,
        n_obs=n,
        alpha_se=float(se[0]),
        beta_se=dict(zip(names, map(float, se[1:]))),
        alpha_p=float(pvals[0]),
        beta_p=dict(zip(names, map(float, pvals[1:]))),
    )


def load_factors(path) -> pd.DataFrame:
    """Factor CSV: a ``date`` column then one column per factor, daily fractions."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    try:
        df = pd.read_csv(path)
        if df.columns[0] != "date" or df.shape[1] < 2:
            raise DataError("factor file needs a date column followed by factor columns")
        df["date"] = pd.to_datetime(df["date"], format="%Y-%m-%d")
        return df.set_index("date").astype(float).sort_index()
    except (ValueError, pd.errors.ParserError) as exc:
        if isinstance(exc, DataError):
            raise
        raise DataError(f"cannot parse factor file {path}: {exc}") from exc


def regress_aligned(returns: pd.Series, factors: pd.DataFrame) -> FactorRegressionResult:
    """Regress on the dates both series share."""
    joined = factors.join(returns.rename("__ret__"), how="inner").dropna()
    if joined.empty:
        raise DataError("returns and factors share no dates")
    names = [c for c in joined.columns if c != "__ret__"]
    return factor_regression(joined["__ret__"].to_numpy(), joined[names].to_numpy(), names)
