"""Command-line entry point: ``prefarb <command> [options]``.

Exit codes: 0 success, 1 usage error, 2 data or configuration error.
Every run writes ``manifest.json`` to its output directory; pass it back with
``prefarb --manifest FILE`` to repeat the run exactly.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from .backtest import BacktestConfig, bootstrap_study, rank_day, run_backtest, summarize
from .errors import ConfigError, DataError, PrefArbError
from .estimator_lab import variance_study
from .graph import write_graph
from .market_data import SyntheticMarketSpec, generate_synthetic, load_panel, write_panel
from .portfolio import allocate
from .regression import load_factors, regress_aligned

log = logging.getLogger("prefarb")

DEFAULT_SEED = 12345
COMMANDS = ("rank", "backtest", "bootstrap", "simulate", "validate-estimator", "regress")

# CLI flag dest -> BacktestConfig field
CONFIG_FLAGS = {
    "lookback": "lookback",
    "kappa": "kappa",
    "n_top": "n_top",
    "m_bottom": "m_bottom",
    "tc_rate": "tc_rate",
    "scheme": "scheme",
    "momentum": "momentum",
    "convention": "estimator_convention",
    "orientation": "orientation",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser, data: bool = True) -> None:
    p.add_argument("--config", help="JSON file with BacktestConfig keys")
    if data:
        p.add_argument("--data", help="panel CSV (date,ticker,open,close)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int, help=f"RNG seed (default {DEFAULT_SEED})")
    p.add_argument("--threads", type=int, default=1, help="worker cap for parallel stages")


def _strategy(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("strategy (overrides --config)")
    g.add_argument("--lookback", type=int)
    g.add_argument("--kappa", type=float)
    g.add_argument("--n-top", type=int)
    g.add_argument("--m-bottom", type=int)
    g.add_argument("--tc-rate", type=float)
    g.add_argument("--scheme", choices=["equal", "utility_proportional"])
    g.add_argument("--momentum", action=argparse.BooleanOptionalAction, default=None)
    g.add_argument("--convention", choices=["standard", "paper"])
    g.add_argument("--orientation", choices=["reversion", "spread"])


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="prefarb", description=__doc__.splitlines()[0])
    parser.add_argument("--manifest", help="repeat the run recorded in this manifest.json")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("rank", help="signals and weights for one date")
    _common(p)
    _strategy(p)
    p.add_argument("--date", help="signal date YYYY-MM-DD (default: last date)")

    p = sub.add_parser("backtest", help="daily backtest over the whole panel")
    _common(p)
    _strategy(p)

    p = sub.add_parser("bootstrap", help="backtests over random security subsets")
    _common(p)
    _strategy(p)
    p.add_argument("--subset-size", type=int, required=True)
    p.add_argument("--samples", type=int, default=100)

    p = sub.add_parser("simulate", help="write a synthetic cointegrated panel")
    _common(p, data=False)
    p.add_argument("--n-securities", type=int, default=60)
    p.add_argument("--n-days", type=int, default=2000)
    p.add_argument("--n-clusters", type=int, default=6)
    p.add_argument("--reversion", type=float, default=0.1)
    p.add_argument("--spread-vol", type=float, default=0.01)
    p.add_argument("--market-vol", type=float, default=0.02)

    p = sub.add_parser("validate-estimator", help="Monte Carlo variance of the utility estimator")
    _common(p, data=False)
    p.add_argument("--n", type=int, nargs="+", default=[100])
    p.add_argument("--cov", type=float, nargs="+", default=[0.0])
    p.add_argument("--sigma2", type=float, default=1.0)
    p.add_argument("--trials", type=int, help="trials per grid point (default: 1%% standard error rule)")

    p = sub.add_parser("regress", help="factor regression of a return series")
    _common(p, data=False)
    p.add_argument("--returns", required=True, help="CSV with a date column, e.g. daily.csv")
    p.add_argument("--column", default="net_return")
    p.add_argument("--factors", required=True, help="CSV: date,<factor>,...")
    return parser


def resolve_config(args: argparse.Namespace) -> BacktestConfig:
    data = {}
    if getattr(args, "config", None):
        try:
            data = json.loads(Path(args.config).read_text())
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {args.config}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {args.config}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
    for flag, key in CONFIG_FLAGS.items():
        value = getattr(args, flag, None)
        if value is not None:
            data[key] = value
    if args.seed is not None:
        data["seed"] = args.seed
    data.setdefault("seed", DEFAULT_SEED)
    try:
        return BacktestConfig.from_dict(data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def _out_dir(args) -> Path:
    if not args.out:
        raise UsageError("--out is required")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _panel(args):
    if not getattr(args, "data", None):
        raise UsageError("--data is required")
    return load_panel(args.data)


def _dump_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not JSON serializable: {type(x)}")


def _write_manifest(args, out: Path, config: BacktestConfig | None) -> None:
    recorded = {k: v for k, v in vars(args).items() if k not in ("threads", "manifest", "verbose", "out")}
    # absolute input paths keep the manifest replayable from any working directory
    for key in ("data", "config", "returns", "factors"):
        if recorded.get(key):
            recorded[key] = str(Path(recorded[key]).resolve())
    manifest = {
        "command": args.command,
        "args": recorded,
        "config": config.to_dict() if config else None,
        "data_path": recorded.get("data"),
        "output_dir": str(out),
    }
    _dump_json(manifest, out / "manifest.json")


def _day_str(d) -> str:
    return str(np.datetime64(d, "D"))


def cmd_rank(args) -> None:
    config = resolve_config(args)
    panel = _panel(args)
    out = _out_dir(args)
    t = panel.n_days - 1 if args.date is None else panel.date_index(args.date)
    if t < config.lookback:
        raise DataError(f"date {_day_str(panel.dates[t])} has fewer than {config.lookback} days of history")
    u, graph, signals = rank_day(panel, t, config)
    w = allocate(signals, u, config.scheme)
    write_graph(graph, out / "edges.csv", out / "utilities.csv", labels=panel.tickers)
    tick = panel.tickers
    report = {
        "date": _day_str(panel.dates[t]),
        "config": config.to_dict(),
        "longs": [tick[i] for i in sorted(signals.longs, key=lambda i: (-u[i], i))],
        "shorts": [tick[i] for i in sorted(signals.shorts, key=lambda i: (u[i], i))],
        "weights": {tick[i]: float(w[i]) for i in np.flatnonzero(w)},
        "utilities": {tick[i]: float(u[i]) for i in range(len(u))},
        "n_edges": graph.n_edges,
    }
    _dump_json(report, out / "rank.json")
    _write_manifest(args, out, config)


def write_backtest(report, config: BacktestConfig, out: Path) -> None:
    daily = pd.DataFrame(
        {
            "date": [_day_str(d) for d in report.dates],
            "net_return": report.daily_returns,
            "gross_return": report.gross_returns,
            "long_return": report.long_returns,
            "short_return": report.short_returns,
            "turnover": report.daily_turnover,
        }
    )
    daily.to_csv(out / "daily.csv", index=False, float_format="%.17g", lineterminator="\n")

    with (out / "positions.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "ticker", "side", "weight"])
        for d, ticker, side, weight in report.positions_log:
            w.writerow([_day_str(d), ticker, side, repr(weight)])

    lengths, counts = np.unique(report.holding_periods, return_counts=True)
    with (out / "holding_hist.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["holding_period", "count"])
        w.writerows(zip(lengths.tolist(), counts.tolist()))

    pre = summarize(report.gross_returns)
    hp = report.holding_periods
    _dump_json(
        {
            "config": config.to_dict(),
            "n_days": len(report.daily_returns),
            "ann_mean": report.ann_mean,
            "ann_std": report.ann_std,
            "t_stat": report.t_stat,
            "degenerate": report.summary.degenerate,
            "pre_cost": {"ann_mean": pre.ann_mean, "ann_std": pre.ann_std, "t_stat": pre.t_stat},
            "avg_turnover": float(report.daily_turnover.mean()),
            "median_holding_period": float(np.median(hp)) if len(hp) else 0.0,
        },
        out / "summary.json",
    )


def cmd_backtest(args) -> None:
    config = resolve_config(args)
    panel = _panel(args)
    out = _out_dir(args)
    report = run_backtest(panel, config)
    write_backtest(report, config, out)
    _write_manifest(args, out, config)


def cmd_bootstrap(args) -> None:
    config = resolve_config(args)
    panel = _panel(args)
    out = _out_dir(args)
    summary = bootstrap_study(panel, config, args.subset_size, args.samples, threads=max(1, args.threads))
    body = summary.to_dict()
    samples = body.pop("samples")
    body["config"] = config.to_dict()
    _dump_json(body, out / "summary.json")
    pd.DataFrame(samples).assign(tickers=lambda d: d["tickers"].map(" ".join)).to_csv(
        out / "samples.csv", index=False, float_format="%.17g", lineterminator="\n"
    )
    _write_manifest(args, out, config)


def cmd_simulate(args) -> None:
    out = _out_dir(args)
    spec = SyntheticMarketSpec(
        n_securities=args.n_securities,
        n_days=args.n_days,
        n_clusters=args.n_clusters,
        spread_reversion=args.reversion,
        spread_vol=args.spread_vol,
        market_vol=args.market_vol,
        seed=DEFAULT_SEED if args.seed is None else args.seed,
    )
    write_panel(generate_synthetic(spec), out / "panel.csv")
    _write_manifest(args, out, None)


def cmd_validate(args) -> None:
    out = _out_dir(args)
    seed = DEFAULT_SEED if args.seed is None else args.seed
    rows = variance_study(args.n, args.cov, args.sigma2, args.trials, seed, threads=max(1, args.threads))
    with (out / "variance_study.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "cov", "theoretical_var", "empirical_var"])
        for r in rows:
            w.writerow([r["n"], repr(float(r["cov"])), repr(r["theoretical_var"]), repr(r["empirical_var"])])
    _write_manifest(args, out, None)


def cmd_regress(args) -> None:
    out = _out_dir(args)
    path = Path(args.returns)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    returns = pd.read_csv(path)
    if "date" not in returns or args.column not in returns:
        raise DataError(f"{path} needs columns date and {args.column}")
    series = returns.set_index(pd.to_datetime(returns["date"], format="%Y-%m-%d"))[args.column]
    result = regress_aligned(series, load_factors(args.factors))
    _dump_json(result.to_dict(), out / "regression.json")
    _write_manifest(args, out, None)


HANDLERS = {
    "rank": cmd_rank,
    "backtest": cmd_backtest,
    "bootstrap": cmd_bootstrap,
    "simulate": cmd_simulate,
    "validate-estimator": cmd_validate,
    "regress": cmd_regress,
}


def _from_manifest(path: str, out: str | None, threads: int | None) -> argparse.Namespace:
    try:
        manifest = json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise DataError(f"manifest not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid manifest {path}: {exc}") from exc
    recorded = dict(manifest["args"])
    # the resolved config replaces any config file that may since have changed
    recorded["config"] = None
    if manifest.get("config"):
        for flag, key in CONFIG_FLAGS.items():
            recorded[flag] = manifest["config"][key]
        recorded["seed"] = manifest["config"]["seed"]
    ns = argparse.Namespace(**recorded)
    ns.command = manifest["command"]
    ns.out = out or manifest["output_dir"]
    ns.threads = threads if threads is not None else 1
    ns.manifest = None
    ns.verbose = False
    return ns


def main(argv=None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)

    # allow `--manifest FILE [--out DIR] [--threads K]` without a subcommand
    if "--manifest" in argv and not any(a in COMMANDS for a in argv):
        mp = _Parser(prog="prefarb")
        mp.add_argument("--manifest", required=True)
        mp.add_argument("--out")
        mp.add_argument("--threads", type=int)
        mp.add_argument("-v", "--verbose", action="store_true")
        margs = mp.parse_args(argv)
        try:
            args = _from_manifest(margs.manifest, margs.out, margs.threads)
        except (PrefArbError, KeyError) as exc:
            print(f"prefarb: error: {exc}", file=sys.stderr)
            return 2
    else:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_usage(sys.stderr)
            return 1

    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        HANDLERS[args.command](args)
    except UsageError as exc:
        print(f"prefarb: usage error: {exc}", file=sys.stderr)
        return 1
    except (PrefArbError, ValueError, OSError) as exc:
        print(f"prefarb: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
