"""Daily long-short backtest with next-day-open execution and security bootstrapping."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .errors import ConfigError, DataError
from .graph import TradeSignalSet, select_signals
from .market_data import PricePanel
from .portfolio import PositionRegistry, allocate, momentum_update
from .potential import solve_utilities
from .signal import preference_matrix, security_scoreable

TRADING_DAYS = 252


@dataclass(frozen=True)
class BacktestConfig:
    lookback: int = 60
    kappa: float = 3.0
    n_top: int = 20
    m_bottom: int = 20
    tc_rate: float = 0.001
    scheme: str = "utility_proportional"
    momentum: bool = True
    estimator_convention: str = "standard"
    orientation: str = "reversion"
    seed: int = 12345

    def __post_init__(self) -> None:
        if int(self.lookback) != self.lookback or self.lookback < 3:
            raise ConfigError("lookback must be an integer >= 3")
        if not self.kappa >= 0:
            raise ConfigError("kappa must be >= 0")
        if self.n_top < 0 or self.m_bottom < 0:
            raise ConfigError("n_top and m_bottom must be >= 0")
        if not self.tc_rate >= 0:
            raise ConfigError("tc_rate must be >= 0")
        if self.scheme not in ("equal", "utility_proportional"):
            raise ConfigError(f"unknown scheme {self.scheme!r}")
        if self.estimator_convention not in ("standard", "paper"):
            raise ConfigError(f"unknown estimator convention {self.estimator_convention!r}")
        if self.orientation not in ("reversion", "spread"):
            raise ConfigError(f"unknown orientation {self.orientation!r}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> BacktestConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True)
class Summary:
    ann_mean: float
    ann_std: float
    t_stat: float
    degenerate: bool = False


def summarize(daily_returns) -> Summary:
    """Annualized mean and std (252 days) and the t-statistic of the daily mean.

    A series with zero dispersion reports ``t_stat = 0`` and ``degenerate``.
    """
    r = np.asarray(daily_returns, dtype=float)
    if len(r) < 2:
        raise DataError("need at least two returns to summarize")
    mean = r.mean()
    std = r.std(ddof=1)
    if std == 0:
        return Summary(TRADING_DAYS * mean, 0.0, 0.0, degenerate=True)
    return Summary(TRADING_DAYS * mean, math.sqrt(TRADING_DAYS) * std, mean / (std / math.sqrt(len(r))))


@dataclass
class BacktestReport:
    dates: np.ndarray  # execution dates
    tickers: tuple[str, ...]
    weights: np.ndarray  # [days x n]
    daily_returns: np.ndarray  # net of costs
    gross_returns: np.ndarray
    long_returns: np.ndarray
    short_returns: np.ndarray  # short leg held as a long portfolio
    daily_turnover: np.ndarray
    holding_periods: np.ndarray
    summary: Summary
    signal_dates: np.ndarray = field(repr=False, default=None)

    @property
    def ann_mean(self) -> float:
        return self.summary.ann_mean

    @property
    def ann_std(self) -> float:
        return self.summary.ann_std

    @property
    def t_stat(self) -> float:
        return self.summary.t_stat

    @property
    def positions_log(self) -> list[tuple[np.datetime64, str, str, float]]:
        out = []
        for d, row in zip(self.dates, self.weights):
            for i in np.flatnonzero(row):
                out.append((d, self.tickers[i], "long" if row[i] > 0 else "short", float(row[i])))
        return out


def holding_periods(weights: np.ndarray) -> np.ndarray:
    """Lengths of runs of consecutive days a security is held on one side."""
    side = np.sign(weights).astype(np.int8)
    lengths = []
    for col in side.T:
        run = 0
        prev = 0
        for s in col:
            if s != 0 and s == prev:
                run += 1
            else:
                if run:
                    lengths.append(run)
                run = 1 if s != 0 else 0
            prev = s
        if run:
            lengths.append(run)
    return np.asarray(lengths, dtype=np.int64)


def rank_day(panel: PricePanel, t: int, config: BacktestConfig):
    """Utilities, pruned preference graph and trade signals from closes up to day ``t``."""
    rho = preference_matrix(panel, t, config.lookback, config.estimator_convention)
    u = solve_utilities(rho)
    if config.orientation == "reversion":
        # a rich spread means s_i is overpriced relative to s_j: prefer s_j
        u = -u
    graph, signals = select_signals(u, config.kappa, config.n_top, config.m_bottom)
    return u, graph, signals


def decide_weights(panel: PricePanel, t: int, config: BacktestConfig, registry: PositionRegistry | None):
    """Weights chosen with closes up to day ``t``, to be executed at the open of ``t + 1``.

    Securities without a valid open on ``t + 1`` are untradeable and are
    dropped (and exited) before allocation.
    """
    u, _, signals = rank_day(panel, t, config)
    tradeable = panel.valid[t + 1] & security_scoreable(panel, t, config.lookback)
    signals = TradeSignalSet(
        frozenset(s for s in signals.longs if tradeable[s]),
        frozenset(s for s in signals.shorts if tradeable[s]),
        signals.relation,
    )
    if registry is not None:
        registry, signals = momentum_update(registry, u, signals, scoreable=tradeable, date=panel.dates[t + 1])
    return allocate(signals, u, config.scheme), registry


def open_to_open(panel: PricePanel, t: int) -> np.ndarray:
    """Return from the open of ``t`` to the open of ``t + 1``; 0 where either is missing."""
    ok = panel.valid[t] & panel.valid[t + 1]
    r = np.zeros(panel.n_securities)
    r[ok] = panel.open[t + 1, ok] / panel.open[t, ok] - 1.0
    return r


def pnl_step(w: np.ndarray, r: np.ndarray, drifted: np.ndarray, tc_rate: float):
    """One day of P&L for weights ``w`` held over returns ``r``.

    ``drifted`` is what yesterday's weights became after yesterday's returns.
    Returns (gross, turnover, net, weights drifted by ``r``).
    """
    turnover = float(np.abs(w - drifted).sum())
    gross = float(w @ r)
    after = w * (1.0 + r) / (1.0 + gross) if gross != -1.0 else np.zeros_like(w)
    return gross, turnover, gross - tc_rate * turnover, after


def run_backtest(panel: PricePanel, config: BacktestConfig) -> BacktestReport:
    """Run the daily pipeline over every day with enough history.

    On signal day ``t`` the portfolio is formed from closes through ``t``,
    bought at the open of ``t + 1`` and marked at the open of ``t + 2``. Net
    return = w . r - tc_rate * sum|w - w_drifted|, where ``w_drifted`` is the
    previous day's weights after their realized returns.
    """
    first, last = config.lookback, panel.n_days - 3
    if last < first:
        raise DataError(f"panel has {panel.n_days} days; need at least lookback + 3 = {config.lookback + 3}")
    days = np.arange(first, last + 1)
    n = panel.n_securities
    W = np.zeros((len(days), n))
    gross = np.zeros(len(days))
    long_r = np.zeros(len(days))
    short_r = np.zeros(len(days))
    turnover = np.zeros(len(days))

    registry = PositionRegistry() if config.momentum else None
    drifted = np.zeros(n)
    for k, t in enumerate(days):
        w, registry = decide_weights(panel, t, config, registry)
        r = open_to_open(panel, t + 1)
        gross[k], turnover[k], _, drifted = pnl_step(w, r, drifted, config.tc_rate)
        long_r[k] = float(np.where(w > 0, w, 0.0) @ r)
        short_r[k] = float(np.where(w < 0, -w, 0.0) @ r)
        W[k] = w

    net = gross - config.tc_rate * turnover
    return BacktestReport(
        dates=panel.dates[days + 1],
        tickers=panel.tickers,
        weights=W,
        daily_returns=net,
        gross_returns=gross,
        long_returns=long_r,
        short_returns=short_r,
        daily_turnover=turnover,
        holding_periods=holding_periods(W),
        summary=summarize(net),
        signal_dates=panel.dates[days],
    )


def nearest_rank(values, pct: float) -> float:
    """Nearest-rank percentile: the ceil(pct/100 * n)-th smallest value."""
    v = np.sort(np.asarray(values, dtype=float))
    rank = max(1, math.ceil(pct / 100.0 * len(v)))
    return float(v[rank - 1])


@dataclass(frozen=True)
class StatInterval:
    median: float
    lo: float  # 2.5th percentile
    hi: float  # 97.5th percentile

    @classmethod
    def of(cls, values) -> StatInterval:
        return cls(float(np.median(values)), nearest_rank(values, 2.5), nearest_rank(values, 97.5))


@dataclass(frozen=True)
class BootstrapSummary:
    subset_size: int
    n_samples: int
    ann_mean: StatInterval
    ann_std: StatInterval
    t_stat: StatInterval
    gross_ann_mean: StatInterval
    avg_turnover: StatInterval
    samples: list[dict]

    def to_dict(self) -> dict:
        return asdict(self)


def bootstrap_subset(n_total: int, subset_size: int, seed: int, index: int) -> np.ndarray:
    """Sorted random subset for bootstrap sample ``index``; its stream depends only on (seed, index)."""
    rng = np.random.default_rng([seed, index])
    return np.sort(rng.choice(n_total, size=subset_size, replace=False))


def _bootstrap_sample(panel: PricePanel, config: BacktestConfig, subset_size: int, index: int) -> dict:
    cols = bootstrap_subset(panel.n_securities, subset_size, config.seed, index)
    rep = run_backtest(panel.subset(cols), config)
    pre_cost = summarize(rep.gross_returns)
    return {
        "index": index,
        "tickers": [panel.tickers[i] for i in cols],
        "ann_mean": rep.ann_mean,
        "ann_std": rep.ann_std,
        "t_stat": rep.t_stat,
        "gross_ann_mean": pre_cost.ann_mean,
        "avg_turnover": float(rep.daily_turnover.mean()),
    }


def bootstrap_study(
    panel: PricePanel,
    config: BacktestConfig,
    subset_size: int,
    n_samples: int,
    threads: int = 1,
) -> BootstrapSummary:
    """Backtest ``n_samples`` random security subsets of a fixed size.

    Subsets may overlap across samples. Results do not depend on ``threads``.
    """
    if not 1 <= subset_size <= panel.n_securities:
        raise DataError(f"subset size {subset_size} outside [1, {panel.n_securities}]")
    if n_samples < 1:
        raise DataError("need at least one bootstrap sample")

    def job(i: int) -> dict:
        return _bootstrap_sample(panel, config, subset_size, i)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            samples = list(pool.map(job, range(n_samples)))
    else:
        samples = [job(i) for i in range(n_samples)]

    def col(key: str) -> StatInterval:
        return StatInterval.of([s[key] for s in samples])

    return BootstrapSummary(
        subset_size=subset_size,
        n_samples=n_samples,
        ann_mean=col("ann_mean"),
        ann_std=col("ann_std"),
        t_stat=col("t_stat"),
        gross_ann_mean=col("gross_ann_mean"),
        avg_turnover=col("avg_turnover"),
        samples=samples,
    )
