import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_panel
from prefarb.errors import DataError
from prefarb.market_data import (
    PricePanel,
    SyntheticMarketSpec,
    cluster_labels,
    generate_synthetic,
    load_panel,
    write_panel,
)

CSV = """date,ticker,open,close
2021-01-04,AAA,10,10.5
2021-01-04,BBB,20,19.5
2021-01-05,AAA,10.5,11
2021-01-05,BBB,19.5,19
2021-01-06,AAA,11,11.25
2021-01-06,BBB,19,18.5
"""


def _write(tmp_path, text, name="panel.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_load_small_panel(tmp_path):
    panel = load_panel(_write(tmp_path, CSV))
    assert (panel.n_days, panel.n_securities) == (3, 2)
    assert panel.valid.all()
    assert panel.tickers == ("AAA", "BBB")
    assert panel.close[1, 0] == 11.0 and panel.open[2, 1] == 19.0
    assert str(panel.dates[0]) == "2021-01-04"


def test_blank_close_marks_single_cell_invalid(tmp_path):
    text = CSV.replace("2021-01-05,BBB,19.5,19", "2021-01-05,BBB,19.5,")
    panel = load_panel(_write(tmp_path, text))
    expected = np.ones((3, 2), dtype=bool)
    expected[1, 1] = False
    np.testing.assert_array_equal(panel.valid, expected)
    assert np.isnan(panel.close[1, 1]) and panel.open[1, 1] == 19.5


def test_absent_row_is_invalid(tmp_path):
    text = "\n".join(line for line in CSV.splitlines() if not line.startswith("2021-01-06,AAA")) + "\n"
    panel = load_panel(_write(tmp_path, text))
    assert not panel.valid[2, 0] and panel.valid[2, 1]


@pytest.mark.parametrize(
    "text",
    [
        CSV.replace("19.5,19\n", "19.5,-5.0\n"),
        CSV.replace("10,10.5", "0,10.5"),
        CSV.replace("2021-01-05,AAA,10.5,11", "2021-01-05,AAA,ten,11"),
        CSV.replace("2021-01-06", "06/01/2021"),
        CSV + "2021-01-06,AAA,11,11.25\n",
        CSV.replace("date,ticker,open,close", "date,ticker,close,open"),
        "date,ticker,open,close\n",
        "",
    ],
    ids=["negative", "zero", "text-price", "bad-date", "duplicate", "header", "no-rows", "empty-file"],
)
def test_load_rejects_bad_files(tmp_path, text):
    with pytest.raises(DataError):
        load_panel(_write(tmp_path, text))


def test_load_missing_file(tmp_path):
    with pytest.raises(DataError):
        load_panel(tmp_path / "absent.csv")


def test_round_trip_reproduces_file(tmp_path):
    src = _write(tmp_path, CSV.replace("2021-01-05,BBB,19.5,19", "2021-01-05,BBB,19.5,"))
    out = tmp_path / "copy.csv"
    write_panel(load_panel(src), out)
    assert out.read_text() == src.read_text()


def test_writer_sorts_by_date_then_ticker(tmp_path):
    shuffled = "\n".join([CSV.splitlines()[0]] + CSV.splitlines()[1:][::-1]) + "\n"
    out = tmp_path / "sorted.csv"
    write_panel(load_panel(_write(tmp_path, shuffled)), out)
    assert out.read_text() == CSV


@settings(max_examples=30, deadline=None)
@given(
    n=st.integers(1, 4),
    T=st.integers(1, 6),
    seed=st.integers(0, 2**31),
    holes=st.floats(0, 0.4),
)
def test_round_trip_property(tmp_path_factory, n, T, seed, holes):
    rng = np.random.default_rng(seed)
    close = np.round(rng.uniform(1, 500, (T, n)), 4)
    open_ = np.round(rng.uniform(1, 500, (T, n)), 4)
    close[rng.random((T, n)) < holes] = np.nan
    panel = make_panel(close, open_)
    path = tmp_path_factory.mktemp("rt") / "p.csv"
    write_panel(panel, path)
    back = load_panel(path)
    np.testing.assert_array_equal(back.valid, panel.valid)
    np.testing.assert_array_equal(back.close, panel.close)
    np.testing.assert_array_equal(back.open, panel.open)
    assert back.tickers == panel.tickers


def test_panel_invariants():
    close = np.full((3, 2), 10.0)
    with pytest.raises(DataError):
        PricePanel(np.array(["2020-01-02", "2020-01-01", "2020-01-03"]), ("A", "B"), close, close)
    with pytest.raises(DataError):
        PricePanel(np.array(["2020-01-01", "2020-01-02", "2020-01-03"]), ("A", "A"), close, close)
    with pytest.raises(DataError):
        PricePanel(np.array(["2020-01-01", "2020-01-02"]), ("A", "B"), close, close)
    with pytest.raises(DataError):
        make_panel(-close)
    panel = make_panel(close)
    with pytest.raises(ValueError):
        panel.close[0, 0] = 1.0


def test_subset_and_date_index():
    rng = np.random.default_rng(1)
    panel = make_panel(rng.uniform(1, 2, (5, 4)))
    sub = panel.subset([3, 1])
    assert sub.tickers == ("T3", "T1")
    np.testing.assert_array_equal(sub.close, panel.close[:, [3, 1]])
    assert panel.date_index("2020-01-03") == 2
    with pytest.raises(DataError):
        panel.date_index("2019-12-31")


def test_spec_validation():
    with pytest.raises(ValueError):
        SyntheticMarketSpec(n_securities=3, n_clusters=4)
    with pytest.raises(ValueError):
        SyntheticMarketSpec(spread_reversion=0.0)
    with pytest.raises(ValueError):
        SyntheticMarketSpec(spread_reversion=1.5)
    with pytest.raises(ValueError):
        SyntheticMarketSpec(spread_vol=-0.1)


def test_zero_noise_prices_constant_within_cluster():
    spec = SyntheticMarketSpec(n_securities=8, n_days=50, n_clusters=2, spread_vol=0.0, market_vol=0.0)
    panel = generate_synthetic(spec)
    labels = cluster_labels(spec)
    for c in range(2):
        block = panel.close[:, labels == c]
        assert np.all(block == block[0, 0])
    np.testing.assert_array_equal(panel.open, panel.close)


def test_generator_is_deterministic():
    spec = SyntheticMarketSpec(n_securities=12, n_days=200, n_clusters=3, seed=7)
    a, b = generate_synthetic(spec), generate_synthetic(spec)
    assert a.close.tobytes() == b.close.tobytes() and a.open.tobytes() == b.open.tobytes()
    c = generate_synthetic(SyntheticMarketSpec(n_securities=12, n_days=200, n_clusters=3, seed=8))
    assert not np.array_equal(a.close, c.close)


def test_dates_are_business_days():
    panel = generate_synthetic(SyntheticMarketSpec(n_securities=2, n_days=10, n_clusters=1))
    assert np.all(np.is_busday(panel.dates))
    assert str(panel.dates[0]) == "2000-01-03"


def _lag1(x):
    x = x - x.mean()
    return float(x[1:] @ x[:-1] / (x @ x))


def _intra_cluster_spreads(spec):
    panel = generate_synthetic(spec)
    labels = cluster_labels(spec)
    logp = np.log(panel.close)
    out = []
    for c in range(spec.n_clusters):
        members = np.flatnonzero(labels == c)
        for a, b in zip(members[:-1], members[1:]):
            out.append(logp[:, a] - logp[:, b])
    return out


def test_intra_cluster_spread_is_ar1():
    spec = SyntheticMarketSpec(n_securities=10, n_days=2000, n_clusters=2, spread_reversion=0.1, seed=0)
    ac = [_lag1(s) for s in _intra_cluster_spreads(spec)]
    assert abs(np.mean(ac) - 0.9) <= 0.03
    assert all(abs(a - 0.9) <= 0.05 for a in ac)


@pytest.mark.parametrize("reversion", [0.05, 0.1, 0.3])
def test_intra_cluster_spread_is_stationary(reversion):
    spec = SyntheticMarketSpec(n_securities=10, n_days=2000, n_clusters=2, spread_reversion=reversion, seed=3)
    for s in _intra_cluster_spreads(spec):
        assert _lag1(s) < 1.0 - reversion / 2


def test_overnight_gap_scale():
    spec = SyntheticMarketSpec(n_securities=20, n_days=1500, n_clusters=4, market_vol=0.02, seed=5)
    panel = generate_synthetic(spec)
    gap = np.log(panel.open[1:] / panel.close[:-1])
    assert abs(gap.std() / (0.25 * spec.market_vol) - 1.0) < 0.03
    assert abs(gap.mean()) < 1e-3
