"""Price panels: CSV ingest/export and a synthetic cointegrated universe."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import DataError

PANEL_COLUMNS = ["date", "ticker", "open", "close"]


@dataclass(frozen=True)
class PricePanel:
    """Date-indexed open/close prices for a fixed set of tickers.

    ``valid[t, i]`` is true where both the open and the close of ticker ``i``
    were observed on ``dates[t]``. An invalid cell may still carry the one
    price that was observed; consumers go by ``valid``, not by NaN checks.
    """

    dates: np.ndarray
    tickers: tuple[str, ...]
    close: np.ndarray
    open: np.ndarray
    valid: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        dates = np.asarray(self.dates, dtype="datetime64[D]")
        # C order keeps downstream BLAS reductions bit-identical across copies
        close = np.array(self.close, dtype=float, order="C")
        open_ = np.array(self.open, dtype=float, order="C")
        tickers = tuple(str(t) for t in self.tickers)

        if close.ndim != 2 or close.shape != open_.shape:
            raise DataError(f"open/close shape mismatch: {open_.shape} vs {close.shape}")
        if close.shape != (len(dates), len(tickers)):
            raise DataError(
                f"price matrix {close.shape} does not match {len(dates)} dates x {len(tickers)} tickers"
            )
        if len(dates) == 0 or len(tickers) == 0:
            raise DataError("empty panel")
        if len(set(tickers)) != len(tickers):
            raise DataError("duplicate tickers in panel")
        if len(dates) > 1 and not np.all(dates[1:] > dates[:-1]):
            raise DataError("dates must be strictly increasing")

        observed = np.isfinite(close) & np.isfinite(open_)
        if self.valid is None:
            valid = observed
        else:
            valid = np.array(self.valid, dtype=bool, order="C")
            if valid.shape != close.shape:
                raise DataError("validity mask shape mismatch")
            if np.any(valid & ~observed):
                raise DataError("valid cell without an observed price")
        if np.any(close[np.isfinite(close)] <= 0) or np.any(open_[np.isfinite(open_)] <= 0):
            raise DataError("non-positive price in panel")

        for arr in (dates, close, open_, valid):
            arr.setflags(write=False)
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "tickers", tickers)
        object.__setattr__(self, "close", close)
        object.__setattr__(self, "open", open_)
        object.__setattr__(self, "valid", valid)

    @property
    def n_days(self) -> int:
        return self.close.shape[0]

    @property
    def n_securities(self) -> int:
        return self.close.shape[1]

    def subset(self, columns) -> PricePanel:
        """Panel restricted to the given security indices, in the given order."""
        idx = np.asarray(columns, dtype=int)
        return PricePanel(
            dates=self.dates,
            tickers=tuple(self.tickers[i] for i in idx),
            close=self.close[:, idx],
            open=self.open[:, idx],
            valid=self.valid[:, idx],
        )

    def date_index(self, date) -> int:
        d = np.datetime64(date, "D")
        pos = int(np.searchsorted(self.dates, d))
        if pos >= len(self.dates) or self.dates[pos] != d:
            raise DataError(f"date {d} not in panel")
        return pos

    def replace(self, *, close=None, open=None) -> PricePanel:
        return PricePanel(
            dates=self.dates,
            tickers=self.tickers,
            close=self.close if close is None else close,
            open=self.open if open is None else open,
        )


def load_panel(path) -> PricePanel:
    """Read a long-format ``date,ticker,open,close`` CSV.

    Blank price cells mark the (date, ticker) cell invalid; (date, ticker)
    combinations absent from the file are invalid as well.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    try:
        df = pd.read_csv(path, dtype={"ticker": str}, encoding="utf-8", skipinitialspace=True)
    except (pd.errors.ParserError, UnicodeDecodeError) as exc:
        raise DataError(f"cannot parse {path}: {exc}") from exc
    except pd.errors.EmptyDataError as exc:
        raise DataError(f"empty panel file: {path}") from exc

    if list(df.columns) != PANEL_COLUMNS:
        raise DataError(f"expected header {','.join(PANEL_COLUMNS)}, got {','.join(map(str, df.columns))}")
    if df.empty:
        raise DataError(f"empty panel file: {path}")
    if df["date"].isna().any() or df["ticker"].isna().any():
        raise DataError("row with missing date or ticker")

    try:
        df["date"] = pd.to_datetime(df["date"], format="%Y-%m-%d")
        for col in ("open", "close"):
            df[col] = pd.to_numeric(df[col], errors="raise")
    except (ValueError, TypeError) as exc:
        raise DataError(f"malformed row in {path}: {exc}") from exc

    if df.duplicated(["date", "ticker"]).any():
        raise DataError("duplicate (date, ticker) rows")
    prices = df[["open", "close"]].to_numpy()
    if np.any(prices[np.isfinite(prices)] <= 0):
        raise DataError("non-positive price in panel")

    close = df.pivot(index="date", columns="ticker", values="close").sort_index()
    open_ = df.pivot(index="date", columns="ticker", values="open").reindex(
        index=close.index, columns=close.columns
    )
    return PricePanel(
        dates=close.index.to_numpy().astype("datetime64[D]"),
        tickers=tuple(close.columns),
        close=close.to_numpy(dtype=float),
        open=open_.to_numpy(dtype=float),
    )


def write_panel(panel: PricePanel, path) -> None:
    """Write ``panel`` as long-format CSV sorted by (date, ticker)."""
    order = np.argsort(np.array(panel.tickers, dtype=object), kind="stable")
    t_idx, s_idx = np.meshgrid(np.arange(panel.n_days), order, indexing="ij")
    t_idx, s_idx = t_idx.ravel(), s_idx.ravel()
    df = pd.DataFrame(
        {
            "date": np.datetime_as_string(panel.dates[t_idx], unit="D"),
            "ticker": np.array(panel.tickers, dtype=object)[s_idx],
            "open": panel.open[t_idx, s_idx],
            "close": panel.close[t_idx, s_idx],
        }
    )
    df.to_csv(path, index=False, float_format="%.10g", na_rep="", lineterminator="\n")


@dataclass(frozen=True)
class SyntheticMarketSpec:
    n_securities: int = 60
    n_days: int = 2000
    n_clusters: int = 6
    spread_reversion: float = 0.1
    spread_vol: float = 0.01
    market_vol: float = 0.02
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_securities < 1 or self.n_days < 1 or self.n_clusters < 1:
            raise ValueError("counts must be positive")
        if self.n_clusters > self.n_securities:
            raise ValueError("n_clusters must not exceed n_securities")
        if self.spread_vol < 0 or self.market_vol < 0:
            raise ValueError("volatilities must be non-negative")
        if not 0 < self.spread_reversion <= 1:
            raise ValueError("spread_reversion must lie in (0, 1]")


def cluster_labels(spec: SyntheticMarketSpec) -> np.ndarray:
    """Cluster id of each security: contiguous, near-equal blocks."""
    return np.arange(spec.n_securities) * spec.n_clusters // spec.n_securities


def generate_synthetic(spec: SyntheticMarketSpec, start: str = "2000-01-03") -> PricePanel:
    """Clustered universe: per-cluster random walk plus per-security AR(1) spread.

    log close[t, i] = log 100 + walk[t, cluster(i)] + spread[t, i], with
    spread[t] = (1 - spread_reversion) * spread[t-1] + spread_vol * z.
    The open is the previous close moved by one overnight step of
    0.25 * market_vol.
    """
    rng = np.random.default_rng(spec.seed)
    n, T = spec.n_securities, spec.n_days
    labels = cluster_labels(spec)
    phi = 1.0 - spec.spread_reversion

    walk = np.cumsum(spec.market_vol * rng.standard_normal((T, spec.n_clusters)), axis=0)

    # draw the initial spread from the stationary law so the panel has no burn-in
    stationary_sd = spec.spread_vol / np.sqrt(1.0 - phi**2) if phi < 1 else spec.spread_vol
    shocks = spec.spread_vol * rng.standard_normal((T, n))
    spread = np.empty((T, n))
    spread[0] = stationary_sd * rng.standard_normal(n)
    for t in range(1, T):
        spread[t] = phi * spread[t - 1] + shocks[t]

    log_close = np.log(100.0) + walk[:, labels] + spread
    close = np.exp(log_close)

    overnight = np.exp(0.25 * spec.market_vol * rng.standard_normal((T, n)))
    prev_close = np.vstack([close[:1], close[:-1]])
    open_ = prev_close * overnight

    first = np.datetime64(start, "D")
    dates = np.busday_offset(first, np.arange(T), roll="forward")
    tickers = tuple(f"S{i:03d}" for i in range(n))
    return PricePanel(dates=dates, tickers=tickers, close=close, open=open_)
