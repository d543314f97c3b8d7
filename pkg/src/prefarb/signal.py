"""Pairwise preference values from standardized log-price spreads."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import DataError
from .market_data import PricePanel

Convention = Literal["standard", "paper"]

SIGMA_EPS = 1e-10
# fast-path pair variances below this are recomputed directly from the spreads
_RECHECK_SIGMA = 1e-6


def n_pairs(n: int) -> int:
    return n * (n - 1) // 2


def pair_index(i: int, j: int, n: int) -> int:
    """Position of pair (i, j), i < j, in lexicographic order."""
    if not 0 <= i < j < n:
        raise IndexError(f"pair index needs 0 <= i < j < n, got i={i}, j={j}, n={n}")
    return i * n - i * (i + 1) // 2 + (j - i - 1)


def pair_from_index(k: int, n: int) -> tuple[int, int]:
    """Inverse of :func:`pair_index`."""
    if not 0 <= k < n_pairs(n):
        raise IndexError(f"flat index {k} out of range for n={n}")
    i = 0
    row = n - 1
    while k >= row:
        k -= row
        i += 1
        row -= 1
    return i, i + 1 + k


def pair_arrays(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Row and column indices of all pairs i < j, in lexicographic order."""
    return np.triu_indices(n, 1)


def log_spread(p_i: float, p_j: float) -> float:
    if not (p_i > 0 and p_j > 0):
        raise DataError(f"prices must be positive, got {p_i}, {p_j}")
    # difference of logs keeps the result exactly antisymmetric
    return math.log(p_i) - math.log(p_j)


@dataclass(frozen=True)
class SpreadWindowStats:
    mu: float
    sigma: float
    window_len: int

    @property
    def degenerate(self) -> bool:
        return self.sigma < SIGMA_EPS


def _check_convention(convention: str) -> None:
    if convention not in ("standard", "paper"):
        raise ValueError(f"unknown estimator convention {convention!r}")


def window_stats(spreads, convention: Convention = "standard", lookback: int | None = None) -> SpreadWindowStats:
    """Mean and dispersion of a lookback window of spreads.

    ``standard`` uses the sample mean and the sample standard deviation
    (divisor T - 1). ``paper`` divides the T-term sum by T - 1 for the mean
    and the squared deviations from that mean by T - 2.
    """
    _check_convention(convention)
    x = np.asarray(spreads, dtype=float)
    T = len(x)
    if lookback is not None and T != lookback:
        raise DataError(f"window has {T} values, lookback is {lookback}")
    if T < 3:
        raise DataError("window needs at least 3 observations")
    if convention == "standard":
        mu = x.sum() / T
        sigma = math.sqrt(((x - mu) ** 2).sum() / (T - 1))
    else:
        mu = x.sum() / (T - 1)
        sigma = math.sqrt(((x - mu) ** 2).sum() / (T - 2))
    return SpreadWindowStats(mu=float(mu), sigma=float(sigma), window_len=T)


@dataclass(frozen=True)
class PreferenceMatrix:
    """Antisymmetric pairwise values stored for i < j only."""

    n: int
    values: np.ndarray
    scoreable: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        scoreable = np.asarray(self.scoreable, dtype=bool)
        if values.shape != (n_pairs(self.n),) or scoreable.shape != values.shape:
            raise ValueError(f"expected {n_pairs(self.n)} pair values for n={self.n}")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "scoreable", scoreable)

    @classmethod
    def from_values(cls, n: int, values) -> PreferenceMatrix:
        values = np.asarray(values, dtype=float)
        return cls(n=n, values=values, scoreable=np.ones(values.shape, dtype=bool))

    @classmethod
    def from_dense(cls, matrix) -> PreferenceMatrix:
        """Build from a full n x n matrix, reading its upper triangle."""
        m = np.asarray(matrix, dtype=float)
        i, j = pair_arrays(m.shape[0])
        return cls.from_values(m.shape[0], m[i, j])

    def get(self, i: int, j: int) -> float:
        if i == j:
            return 0.0
        if i < j:
            return float(self.values[pair_index(i, j, self.n)])
        return -float(self.values[pair_index(j, i, self.n)])

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.n, self.n))
        i, j = pair_arrays(self.n)
        out[i, j] = self.values
        out[j, i] = -self.values
        return out


def security_scoreable(panel: PricePanel, t: int, lookback: int) -> np.ndarray:
    """Securities valid on every day of [t - lookback, t]."""
    return panel.valid[t - lookback : t + 1].all(axis=0)


def preference_matrix(
    panel: PricePanel,
    t: int,
    lookback: int = 60,
    convention: Convention = "standard",
) -> PreferenceMatrix:
    """Standardized spread deviation for every pair on day ``t``.

    Window statistics use the closes of days ``t - lookback .. t - 1``; the
    spread on day ``t`` is left out of them. Pairs with a data gap anywhere in
    the window or at ``t``, or with sigma below ``SIGMA_EPS``, get value 0 and
    are flagged non-scoreable.
    """
    _check_convention(convention)
    if lookback < 3:
        raise DataError("lookback must be at least 3")
    if not lookback <= t < panel.n_days:
        raise DataError(f"day index {t} outside [{lookback}, {panel.n_days - 1}]")

    n = panel.n_securities
    I, J = pair_arrays(n)
    sec_ok = security_scoreable(panel, t, lookback)
    ok = sec_ok[I] & sec_ok[J]

    logp = np.log(np.where(sec_ok, panel.close[t - lookback : t + 1], 1.0))
    window, current = logp[:-1], logp[-1]
    T = lookback

    # spread statistics from the window covariance of log prices
    means = window.mean(axis=0)
    centered = window - means
    gram = centered.T @ centered
    diag = np.diag(gram)
    ss = np.maximum(diag[I] + diag[J] - 2.0 * gram[I, J], 0.0)
    spread_mean = means[I] - means[J]

    if convention == "standard":
        mu = spread_mean
        var = ss / (T - 1)
    else:
        mu = spread_mean * T / (T - 1)
        var = (ss + T * (spread_mean - mu) ** 2) / (T - 2)
    sigma = np.sqrt(var)

    near = np.flatnonzero(ok & (sigma < _RECHECK_SIGMA))
    if near.size:
        spreads = window[:, I[near]] - window[:, J[near]]
        for col, k in enumerate(near):
            stats = window_stats(spreads[:, col], convention)
            mu[k], sigma[k] = stats.mu, stats.sigma

    ok &= sigma >= SIGMA_EPS
    values = np.zeros(len(I))
    c = current[I[ok]] - current[J[ok]]
    values[ok] = (c - mu[ok]) / sigma[ok]
    return PreferenceMatrix(n=n, values=values, scoreable=ok)
