import numpy as np
import pytest

from prefarb.market_data import PricePanel

# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def record(criterion: int, passed: bool, detail: str) -> None:
    ACCEPTANCE[criterion] = (bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if passed else 'FAIL'}  {detail}")


def make_panel(close, open_=None, start="2020-01-01", tickers=None) -> PricePanel:
    close = np.asarray(close, dtype=float)
    if open_ is None:
        open_ = close
    T, n = close.shape
    dates = np.datetime64(start, "D") + np.arange(T)
    tickers = tickers or [f"T{i}" for i in range(n)]
    return PricePanel(dates=dates, tickers=tickers, close=close, open=np.asarray(open_, dtype=float))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
